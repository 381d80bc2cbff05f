// ofnav: scenario simulation, fused estimation, evaluation and flow utilities.
//
// Exit codes: 0 ok, 2 configuration/usage, 3 data, 4 semantic.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "ofnav/errors.hpp"
#include "ofnav/eval.hpp"
#include "ofnav/fusion.hpp"
#include "ofnav/image_io.hpp"
#include "ofnav/scenario.hpp"
#include "ofnav/sensor_stream.hpp"
#include "ofnav/svg.hpp"

namespace fs = std::filesystem;
using namespace ofnav;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitSemantic = 4;

const char* kColors[] = {"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string navlog_name(bool use_flow) { return use_flow ? "navlog_flow.csv" : "navlog_noflow.csv"; }

ScenarioConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
  ScenarioConfig c = load_scenario_config(path);
  if (seed) c.seed = *seed;
  return c;
}

// --- plots -------------------------------------------------------------------------

struct LabeledRun {
  std::string label;
  AlignedRun run;
};

PlotSeries series_of(const std::string& label, const char* color, const std::vector<double>& x,
                     const std::vector<double>& y) {
  return PlotSeries{label, color, x, y};
}

std::vector<double> component(const std::vector<Vec3d>& v, int i, double scale = 1.0) {
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = scale * v[k](i);
  return out;
}

void write_plots(const fs::path& dir, const std::vector<LabeledRun>& runs, const std::vector<Vec3d>& path,
                 bool hover) {
  if (runs.empty()) return;
  const AlignedRun& ref = runs.front().run;
  constexpr double kRad2Deg = 180.0 / 3.14159265358979323846;

  // Horizontal plane: east to the right, north up.
  PlotPanel xy{"Horizontal position", "East [m]", "North [m]", {}, std::nullopt, true};
  xy.series.push_back(series_of("truth", "#000000", component(ref.true_pos, 1), component(ref.true_pos, 0)));
  if (path.size() > 1) {
    xy.series.push_back(series_of("reference", "#7f7f7f", component(path, 1), component(path, 0)));
  }
  for (std::size_t i = 0; i < runs.size(); ++i) {
    xy.series.push_back(series_of(runs[i].label, kColors[i % 6], component(runs[i].run.est_pos, 1),
                                  component(runs[i].run.est_pos, 0)));
  }
  if (hover) {
    Vec2d c = Vec2d::Zero();
    for (const auto& p : ref.true_pos) c += p.head<2>();
    c /= static_cast<double>(ref.true_pos.size());
    xy.limits = std::array<double, 4>{c.y() - 1.25, c.y() + 1.25, c.x() - 1.25, c.x() + 1.25};
  }
  write_text_file((dir / "xy.svg").string(), svg_plot({xy}, 640, 560));

  // Projections of the 3-D path, altitude positive up.
  std::vector<PlotPanel> proj(3);
  proj[0] = {"North-East", "East [m]", "North [m]", {}, std::nullopt, true};
  proj[1] = {"North-Altitude", "North [m]", "Altitude [m]", {}, std::nullopt, false};
  proj[2] = {"East-Altitude", "East [m]", "Altitude [m]", {}, std::nullopt, false};
  const auto add_proj = [&](const std::string& label, const char* color, const std::vector<Vec3d>& p) {
    proj[0].series.push_back(series_of(label, color, component(p, 1), component(p, 0)));
    proj[1].series.push_back(series_of(label, color, component(p, 0), component(p, 2, -1.0)));
    proj[2].series.push_back(series_of(label, color, component(p, 1), component(p, 2, -1.0)));
  };
  add_proj("truth", "#000000", ref.true_pos);
  for (std::size_t i = 0; i < runs.size(); ++i) add_proj(runs[i].label, kColors[i % 6], runs[i].run.est_pos);
  write_text_file((dir / "path_3d.svg").string(), svg_plot(proj));

  // Attitude traces in degrees.
  const char* names[] = {"Roll", "Pitch", "Yaw"};
  std::vector<PlotPanel> att(3);
  for (int a = 0; a < 3; ++a) {
    att[static_cast<std::size_t>(a)] = {std::string(names[a]), "t [s]", std::string(names[a]) + " [deg]", {},
                                        std::nullopt, false};
    auto& panel = att[static_cast<std::size_t>(a)];
    panel.series.push_back(series_of("truth", "#000000", ref.t, component(ref.true_att, a, kRad2Deg)));
    for (std::size_t i = 0; i < runs.size(); ++i) {
      panel.series.push_back(
          series_of(runs[i].label, kColors[i % 6], runs[i].run.t, component(runs[i].run.est_att, a, kRad2Deg)));
    }
  }
  write_text_file((dir / "attitude.svg").string(), svg_plot(att));

  std::vector<PlotPanel> vel(2);
  vel[0] = {"North velocity", "t [s]", "V_N [m/s]", {}, std::nullopt, false};
  vel[1] = {"East velocity", "t [s]", "V_E [m/s]", {}, std::nullopt, false};
  for (int a = 0; a < 2; ++a) {
    auto& panel = vel[static_cast<std::size_t>(a)];
    panel.series.push_back(series_of("truth", "#000000", ref.t, component(ref.true_vel, a)));
    for (std::size_t i = 0; i < runs.size(); ++i) {
      panel.series.push_back(series_of(runs[i].label, kColors[i % 6], runs[i].run.t, component(runs[i].run.est_vel, a)));
    }
  }
  write_text_file((dir / "velocity.svg").string(), svg_plot(vel));
}

void write_report(const fs::path& path, const ExperimentReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << report.to_json().dump(2) << '\n';
}

void print_summary(const RunMetrics& m) {
  std::printf("%-8s seed %-4llu scatter %.3f m  max-xtrack %.3f m  rmse N/E %.3f/%.3f m  final %.3g m\n",
              m.label.c_str(), static_cast<unsigned long long>(m.seed), m.scatter, m.max_cross_track, m.rmse.x(),
              m.rmse.y(), m.final_error);
}

// --- commands ----------------------------------------------------------------------

int cmd_simulate(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out_dir) {
  const ScenarioConfig c = load_config(config_path, seed);
  const ScenarioData d = simulate(c);
  write_bundle(out_dir, c, d);
  std::printf("wrote %s: %zu imu, %zu gps, %zu baro, %zu mag, %zu frames (%zu degraded), config %s\n",
              out_dir.c_str(), d.imu.size(), d.gps.size(), d.baro.size(), d.mag.size(), d.camera.size(),
              d.degraded_frames, config_hash(scenario_to_json(c)).c_str());
  return kExitOk;
}

int cmd_fuse(const fs::path& bundle, bool use_flow, const std::string& out_dir) {
  for (const char* f : {"config.json", "sensors.jsonl", "truth.csv"}) {
    if (!fs::exists(bundle / f)) throw DataError("missing " + (bundle / f).string());
  }
  const ScenarioConfig c = load_scenario_config(bundle / "config.json");
  const auto timeline = read_sensor_log(bundle / "sensors.jsonl", use_flow);
  const NavLog log = run_fusion(timeline, fusion_config_for(c, use_flow));

  const fs::path out = out_dir.empty() ? bundle : fs::path(out_dir);
  fs::create_directories(out);
  const fs::path navlog = out / navlog_name(use_flow);
  write_navlog_csv(navlog, log);
  write_innovations_csv(out / (use_flow ? "innovations_flow.csv" : "innovations_noflow.csv"), log);

  const auto truth = read_truth_csv(bundle / "truth.csv");
  const AlignedRun run = align(truth, estimate_rows(log));
  const double final_err = (run.est_pos.back() - run.true_pos.back()).norm();
  std::printf("%s: %zu epochs, %zu flow updates, final position error %.3e m, config %s\n", navlog.c_str(),
              log.records.size(), log.flow_updates, final_err, config_hash(scenario_to_json(c)).c_str());
  if (log.fault) {
    std::fprintf(stderr, "numerical fault at t=%.3f: %s\n", log.fault->t, log.fault->message.c_str());
    return kExitSemantic;
  }
  return kExitOk;
}

int cmd_eval(const std::vector<std::string>& files, const std::string& config_path, const std::string& out_dir) {
  if (files.size() < 2) throw ConfigError("eval: expected truth.csv followed by at least one navlog");
  const fs::path truth_path = files.front();
  std::optional<ScenarioConfig> config;
  if (!config_path.empty()) {
    config = load_scenario_config(config_path);
  } else if (fs::exists(truth_path.parent_path() / "config.json")) {
    config = load_scenario_config(truth_path.parent_path() / "config.json");
  }
  const auto truth = read_truth_csv(truth_path);
  std::vector<Vec3d> path;
  if (config) {
    path = reference_path(*config);
  } else {
    for (const auto& r : truth) path.push_back(r.position);
  }
  const bool hover = config && config->kind == ScenarioKind::Hover;

  ExperimentReport report;
  report.scenario_id = config ? config->id : truth_path.stem().string();
  report.config_hash = config ? config_hash(scenario_to_json(*config)) : "";
  if (config) report.seeds.push_back(config->seed);

  std::vector<LabeledRun> runs;
  for (std::size_t i = 1; i < files.size(); ++i) {
    const fs::path p = files[i];
    const auto est = read_navlog_csv(p);
    RunMetrics m = evaluate_run(truth, est, path);
    m.label = p.stem().string();
    m.use_flow = m.label.find("noflow") == std::string::npos && m.label.find("flow") != std::string::npos;
    m.seed = config ? config->seed : 0;
    print_summary(m);
    report.runs.push_back(m);
    runs.push_back({m.label, align(truth, est)});
  }

  const fs::path out = out_dir.empty() ? truth_path.parent_path() : fs::path(out_dir);
  fs::create_directories(out);
  write_report(out / "report.json", report);
  write_plots(out, runs, path, hover);
  return kExitOk;
}

int cmd_flow(const std::string& a, const std::string& b, const FlowParams& params, double dt,
             const std::string& out_dir) {
  ImageFrame f1, f2;
  try {
    f1.pixels = read_pgm(a);
    f2.pixels = read_pgm(b);
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  if (f1.width() != f2.width() || f1.height() != f2.height()) {
    throw ConfigError("flow: frames differ in size");
  }
  f1.timestamp = 0.0;
  f2.timestamp = dt;
  const FlowField flow = farneback_flow(f1, f2, params);
  const Vec2d median = mean_flow_rate(flow, 0) * dt;

  const fs::path out = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
  fs::create_directories(out);
  write_flow_csv(out / "flow.csv", flow);
  const int stride = std::max<int>(4, static_cast<int>(f1.width() / 24));
  write_text_file((out / "flow.svg").string(), flow_quiver_svg(f1.pixels, flow, stride, 2.0));
  std::printf("median flow %.4f %.4f px/frame, texture %.3g\n", median.x(), median.y(), flow.texture_strength);
  return kExitOk;
}

int cmd_batch(const std::string& config_path, std::optional<std::uint64_t> seed, int runs, const std::string& out_dir) {
  if (runs < 1) throw ConfigError("--runs: must be >= 1");
  ScenarioConfig base = load_config(config_path, seed);
  const fs::path out = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
  fs::create_directories(out);

  ExperimentReport report;
  report.scenario_id = base.id;
  report.config_hash = config_hash(scenario_to_json(base));
  const auto path = reference_path(base);
  std::vector<LabeledRun> first;
  for (int r = 0; r < runs; ++r) {
    ScenarioConfig c = base;
    c.seed = base.seed + static_cast<std::uint64_t>(r);
    report.seeds.push_back(c.seed);
    const ScenarioData d = simulate(c);
    const auto timeline = d.timeline();
    const auto truth = truth_rows(d.truth);
    for (const bool use_flow : {false, true}) {
      const NavLog log = run_fusion(timeline, fusion_config_for(c, use_flow));
      if (log.fault) throw NumericalFault("seed " + std::to_string(c.seed) + ": " + log.fault->message);
      RunMetrics m = evaluate_run(truth, estimate_rows(log), path);
      m.label = use_flow ? "flow" : "noflow";
      m.use_flow = use_flow;
      m.seed = c.seed;
      print_summary(m);
      report.runs.push_back(m);
      if (r == 0) first.push_back({m.label, align(truth, estimate_rows(log))});
    }
  }
  write_report(out / "report.json", report);
  write_plots(out, first, path, base.kind == ScenarioKind::Hover);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optical-flow aided GPS/INS navigation: simulate, fuse, evaluate"};
  app.require_subcommand(1);

  std::string config_path, out_dir, bundle;
  std::optional<std::uint64_t> seed;
  bool use_flow = true;
  int runs = 20;

  auto* sim = app.add_subcommand("simulate", "Generate a scenario bundle from a JSON config");
  sim->add_option("--config", config_path, "Scenario config (JSON)")->required();
  sim->add_option("--seed", seed, "Override the config seed");
  sim->add_option("--out", out_dir, "Bundle directory")->required();

  auto* fuse = app.add_subcommand("fuse", "Run the filter over a scenario bundle");
  fuse->add_option("bundle", bundle, "Scenario bundle directory")->required();
  fuse->add_flag("--use-flow,!--no-flow", use_flow, "Fuse optical-flow velocity (default on)");
  fuse->add_option("--out", out_dir, "Output directory (default: the bundle)");

  std::vector<std::string> eval_files;
  auto* eval = app.add_subcommand("eval", "Compute metrics and plots for navlogs against truth");
  eval->add_option("files", eval_files, "truth.csv followed by one or more navlog CSVs")->required();
  eval->add_option("--config", config_path, "Scenario config for the reference path");
  eval->add_option("--out", out_dir, "Output directory (default: next to truth.csv)");

  std::vector<std::string> frames;
  FlowParams params;
  double dt = 1.0 / 15.0;
  auto* flow = app.add_subcommand("flow", "Dense optical flow between two PGM frames");
  flow->add_option("frames", frames, "frame_a.pgm frame_b.pgm")->required()->expected(2);
  flow->add_option("--levels", params.pyramid_levels, "Pyramid levels");
  flow->add_option("--scale", params.pyramid_scale, "Pyramid scale");
  flow->add_option("--iterations", params.iterations_per_level, "Iterations per level");
  flow->add_option("--poly-n", params.expansion_window, "Expansion window (odd)");
  flow->add_option("--poly-sigma", params.expansion_sigma, "Expansion sigma");
  flow->add_option("--window", params.averaging_window, "Averaging window (odd)");
  flow->add_option("--dt", dt, "Seconds between frames");
  flow->add_option("--out", out_dir, "Output directory");

  auto* batch = app.add_subcommand("batch", "Monte Carlo comparison with and without flow");
  batch->add_option("--config", config_path, "Scenario config (JSON)")->required();
  batch->add_option("--seed", seed, "First seed (default: config seed)");
  batch->add_option("--runs", runs, "Number of seeds");
  batch->add_option("--out", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*sim) return cmd_simulate(config_path, seed, out_dir);
    if (*fuse) return cmd_fuse(bundle, use_flow, out_dir);
    if (*eval) return cmd_eval(eval_files, config_path, out_dir);
    if (*flow) {
      params.validate();
      return cmd_flow(frames[0], frames[1], params, dt, out_dir);
    }
    if (*batch) return cmd_batch(config_path, seed, runs, out_dir);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const InvalidParameter& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const InvalidInput& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitSemantic;
  }
  return kExitOk;
}
