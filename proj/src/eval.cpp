#include "ofnav/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ofnav/errors.hpp"

namespace ofnav {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_cell(const std::string& s, const std::filesystem::path& path, std::size_t line_no) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v)) {
    throw DataError(path.string() + ": line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
  return v;
}

// Reads a CSV with a header row; returns the numeric rows and checks that the
// columns named in `required` exist.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  [[nodiscard]] std::size_t column(const std::string& name, const std::filesystem::path& path) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(path.string() + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  t.header = split_csv(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != t.header.size()) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": expected " +
                      std::to_string(t.header.size()) + " columns, got " + std::to_string(cells.size()));
    }
    std::vector<double> row(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) row[i] = parse_cell(cells[i], path, line_no);
    t.rows.push_back(std::move(row));
  }
  return t;
}

Vec3d lerp(const Vec3d& a, const Vec3d& b, double w) { return a + w * (b - a); }

Vec3d lerp_angles(const Vec3d& a, const Vec3d& b, double w) {
  Vec3d out;
  for (int i = 0; i < 3; ++i) out(i) = wrap_pi(a(i) + w * wrap_pi(b(i) - a(i)));
  return out;
}

}  // namespace

// --- I/O ---------------------------------------------------------------------------

void write_truth_csv(const std::filesystem::path& path, const TruthTrajectory& truth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "t,pos_n,pos_e,pos_d,vel_n,vel_e,vel_d,q0,q1,q2,q3,roll,pitch,yaw\n";
  char buf[40];
  for (const auto& s : truth.samples) {
    const EulerAnglesd e = euler_from_quat(s.attitude);
    const double cols[] = {s.position.x(), s.position.y(), s.position.z(), s.velocity.x(), s.velocity.y(),
                           s.velocity.z(), s.attitude(0),  s.attitude(1),  s.attitude(2),  s.attitude(3),
                           e.roll,         e.pitch,        e.yaw};
    std::snprintf(buf, sizeof buf, "%.6f", s.t);
    out << buf;
    for (const double c : cols) {
      std::snprintf(buf, sizeof buf, ",%.17g", c);
      out << buf;
    }
    out << '\n';
  }
}

std::vector<TruthRow> read_truth_csv(const std::filesystem::path& path) {
  const Table t = read_table(path);
  const std::size_t ct = t.column("t", path);
  const std::size_t cp[] = {t.column("pos_n", path), t.column("pos_e", path), t.column("pos_d", path)};
  const std::size_t cv[] = {t.column("vel_n", path), t.column("vel_e", path), t.column("vel_d", path)};
  const std::size_t ca[] = {t.column("roll", path), t.column("pitch", path), t.column("yaw", path)};
  std::vector<TruthRow> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    TruthRow row;
    row.t = r[ct];
    for (int i = 0; i < 3; ++i) {
      row.position(i) = r[cp[i]];
      row.velocity(i) = r[cv[i]];
      row.attitude(i) = r[ca[i]];
    }
    out.push_back(row);
  }
  return out;
}

std::vector<TruthRow> truth_rows(const TruthTrajectory& truth) {
  std::vector<TruthRow> out;
  out.reserve(truth.samples.size());
  for (const auto& s : truth.samples) {
    const EulerAnglesd e = euler_from_quat(s.attitude);
    out.push_back(TruthRow{s.t, s.position, s.velocity, Vec3d(e.roll, e.pitch, e.yaw)});
  }
  return out;
}

std::vector<EstimateRow> read_navlog_csv(const std::filesystem::path& path) {
  const Table t = read_table(path);
  const std::size_t ct = t.column("t", path);
  const std::size_t cp[] = {t.column("pos_n", path), t.column("pos_e", path), t.column("pos_d", path)};
  const std::size_t cv[] = {t.column("vel_n", path), t.column("vel_e", path), t.column("vel_d", path)};
  const std::size_t ca[] = {t.column("roll", path), t.column("pitch", path), t.column("yaw", path)};
  std::vector<EstimateRow> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    EstimateRow row;
    row.t = r[ct];
    for (int i = 0; i < 3; ++i) {
      row.position(i) = r[cp[i]];
      row.velocity(i) = r[cv[i]];
      row.attitude(i) = r[ca[i]];
    }
    out.push_back(row);
  }
  return out;
}

std::vector<EstimateRow> estimate_rows(const NavLog& log) {
  std::vector<EstimateRow> out;
  out.reserve(log.records.size());
  for (const auto& r : log.records) {
    const OutputVector& o = r.out;
    out.push_back(EstimateRow{r.t, Vec3d(o.pos_n, o.pos_e, o.pos_d), Vec3d(o.vel_n, o.vel_e, o.vel_d),
                              Vec3d(o.roll, o.pitch, o.yaw)});
  }
  return out;
}

// --- alignment ---------------------------------------------------------------------

AlignedRun align(const std::vector<TruthRow>& truth, const std::vector<EstimateRow>& est) {
  if (truth.empty() || est.empty()) throw RangeError("align: empty truth or estimate log");
  const double t0 = truth.front().t, t1 = truth.back().t;
  if (est.back().t < t0 - 1e-9 || est.front().t > t1 + 1e-9) {
    throw RangeError("align: estimate and truth time ranges do not overlap");
  }
  AlignedRun run;
  std::size_t j = 0;
  for (const auto& e : est) {
    if (e.t < t0 - 1e-9 || e.t > t1 + 1e-9) continue;
    while (j + 1 < truth.size() && truth[j + 1].t <= e.t + 1e-9) ++j;
    const TruthRow& a = truth[j];
    TruthRow tr = a;
    if (j + 1 < truth.size() && std::abs(e.t - a.t) > 1e-9) {
      const TruthRow& b = truth[j + 1];
      const double w = (e.t - a.t) / (b.t - a.t);
      tr.position = lerp(a.position, b.position, w);
      tr.velocity = lerp(a.velocity, b.velocity, w);
      tr.attitude = lerp_angles(a.attitude, b.attitude, w);
    }
    run.t.push_back(e.t);
    run.est_pos.push_back(e.position);
    run.true_pos.push_back(tr.position);
    run.est_vel.push_back(e.velocity);
    run.true_vel.push_back(tr.velocity);
    run.est_att.push_back(e.attitude);
    run.true_att.push_back(tr.attitude);
  }
  if (run.t.empty()) throw RangeError("align: no estimate epoch falls inside the truth span");
  return run;
}

// --- metrics -----------------------------------------------------------------------

double horizontal_scatter(const std::vector<Vec3d>& positions) {
  if (positions.empty()) return 0.0;
  Vec2d mean = Vec2d::Zero();
  for (const auto& p : positions) mean += p.head<2>();
  mean /= static_cast<double>(positions.size());
  double sum = 0.0;
  for (const auto& p : positions) sum += (p.head<2>() - mean).squaredNorm();
  return std::sqrt(sum / static_cast<double>(positions.size()));
}

bool inside_box(const std::vector<Vec3d>& positions, double half_width) {
  if (positions.empty()) return true;
  Vec2d lo = positions.front().head<2>(), hi = lo;
  for (const auto& p : positions) {
    lo = lo.cwiseMin(p.head<2>());
    hi = hi.cwiseMax(p.head<2>());
  }
  return ((hi - lo).array() <= 2.0 * half_width).all();
}

double cross_track_distance(const Vec3d& p, const std::vector<Vec3d>& path) {
  if (path.empty()) throw InvalidInput("cross_track_distance: empty reference path");
  const Vec2d x = p.head<2>();
  double best = (x - path.front().head<2>()).norm();
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const Vec2d a = path[i].head<2>(), b = path[i + 1].head<2>();
    const Vec2d ab = b - a;
    const double len2 = ab.squaredNorm();
    const double s = len2 > 0.0 ? std::clamp((x - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, (x - (a + s * ab)).norm());
  }
  return best;
}

CrossTrack cross_track_error(const std::vector<Vec3d>& positions, const std::vector<Vec3d>& path) {
  CrossTrack c;
  if (positions.empty()) return c;
  double sum = 0.0;
  for (const auto& p : positions) {
    const double d = cross_track_distance(p, path);
    c.max = std::max(c.max, d);
    sum += d;
  }
  c.mean = sum / static_cast<double>(positions.size());
  return c;
}

Vec3d rmse_per_axis(const AlignedRun& run) {
  if (run.size() == 0) return Vec3d::Zero();
  Vec3d sum = Vec3d::Zero();
  for (std::size_t i = 0; i < run.size(); ++i) sum += (run.est_pos[i] - run.true_pos[i]).cwiseAbs2();
  return (sum / static_cast<double>(run.size())).cwiseSqrt();
}

std::vector<bool> cruise_mask(const AlignedRun& run, double min_speed) {
  std::vector<bool> mask(run.size());
  for (std::size_t i = 0; i < run.size(); ++i) mask[i] = run.true_vel[i].head<2>().norm() >= min_speed;
  return mask;
}

double attitude_increment_std(const std::vector<Vec3d>& attitude, const std::vector<bool>& mask) {
  if (attitude.size() != mask.size()) throw InvalidInput("attitude_increment_std: mask size mismatch");
  std::vector<double> inc;
  for (std::size_t i = 1; i < attitude.size(); ++i) {
    if (!mask[i] || !mask[i - 1]) continue;
    inc.push_back(wrap_pi(attitude[i](0) - attitude[i - 1](0)));
    inc.push_back(wrap_pi(attitude[i](1) - attitude[i - 1](1)));
  }
  if (inc.size() < 4) return 0.0;
  // Roll and pitch increments share one pooled variance about their own means.
  double mr = 0, mp = 0;
  for (std::size_t i = 0; i < inc.size(); i += 2) {
    mr += inc[i];
    mp += inc[i + 1];
  }
  const double n = static_cast<double>(inc.size() / 2);
  mr /= n;
  mp /= n;
  double ss = 0;
  for (std::size_t i = 0; i < inc.size(); i += 2) ss += (inc[i] - mr) * (inc[i] - mr) + (inc[i + 1] - mp) * (inc[i + 1] - mp);
  return std::sqrt(ss / (2.0 * (n - 1.0)));
}

double nees(const Vec3d& error, const Mat3d& cov) {
  const Eigen::LDLT<Mat3d> ldlt(cov);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all()) throw NumericalFault("nees: covariance is not positive definite");
  return error.dot(ldlt.solve(error));
}

double average_position_nees(const NavLog& log, const TruthTrajectory& truth) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : log.records) {
    const std::size_t k = truth.index_at(r.t);
    const Vec3d err = r.x.segment<3>(state_index::kPos) - truth.samples[k].position;
    sum += nees(err, r.position_cov);
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

std::pair<double, double> nees_band_95(int dof, int runs) {
  // Wilson-Hilferty approximation of the chi-square quantiles for dof * runs degrees.
  const double k = static_cast<double>(dof) * runs;
  const double z = 1.959963984540054;
  const double c = 2.0 / (9.0 * k);
  const auto q = [&](double sign) { return k * std::pow(1.0 - c + sign * z * std::sqrt(c), 3); };
  return {q(-1.0) / runs, q(1.0) / runs};
}

RunMetrics evaluate_run(const std::vector<TruthRow>& truth, const std::vector<EstimateRow>& est,
                        const std::vector<Vec3d>& path, const MetricOptions& options) {
  const AlignedRun run = align(truth, est);
  RunMetrics m;
  m.scatter = horizontal_scatter(run.est_pos);
  m.inside_box = inside_box(run.est_pos, options.box_half_width);
  const CrossTrack ct = cross_track_error(run.est_pos, path);
  m.max_cross_track = ct.max;
  m.mean_cross_track = ct.mean;
  m.rmse = rmse_per_axis(run);
  m.final_error = (run.est_pos.back() - run.true_pos.back()).norm();
  m.attitude_smoothness = attitude_increment_std(run.est_att, cruise_mask(run, options.cruise_speed_threshold));
  const std::size_t stride = std::max<std::size_t>(1, options.series_stride);
  for (std::size_t i = 0; i < run.size(); i += stride) {
    m.t.push_back(run.t[i]);
    m.error.push_back(run.est_pos[i] - run.true_pos[i]);
  }
  return m;
}

nlohmann::json ExperimentReport::to_json() const {
  using nlohmann::json;
  json j;
  j["scenario_id"] = scenario_id;
  j["config_hash"] = config_hash;
  j["seeds"] = seeds;
  j["runs"] = json::array();
  for (const auto& r : runs) {
    json e;
    for (int axis = 0; axis < 3; ++axis) {
      json series = json::array();
      for (const auto& v : r.error) series.push_back(v(axis));
      e[axis == 0 ? "north" : axis == 1 ? "east" : "down"] = std::move(series);
    }
    json jr = {{"label", r.label},
               {"seed", r.seed},
               {"use_flow", r.use_flow},
               {"horizontal_scatter_m", r.scatter},
               {"inside_box", r.inside_box},
               {"max_cross_track_m", r.max_cross_track},
               {"mean_cross_track_m", r.mean_cross_track},
               {"rmse_north_m", r.rmse.x()},
               {"rmse_east_m", r.rmse.y()},
               {"rmse_down_m", r.rmse.z()},
               {"final_error_m", r.final_error},
               {"attitude_increment_std_rad", r.attitude_smoothness},
               {"error_series", {{"t", r.t}, {"error", e}}}};
    j["runs"].push_back(std::move(jr));
  }
  // Ratios only for runs that share a seed: flow value over no-flow value.
  json ratios = json::array();
  for (const auto& a : runs) {
    if (a.use_flow) continue;
    for (const auto& b : runs) {
      if (!b.use_flow || b.seed != a.seed) continue;
      ratios.push_back({{"seed", a.seed},
                        {"scatter_ratio", a.scatter > 0 ? b.scatter / a.scatter : 0.0},
                        {"max_cross_track_ratio", a.max_cross_track > 0 ? b.max_cross_track / a.max_cross_track : 0.0}});
    }
  }
  j["flow_vs_no_flow"] = std::move(ratios);
  return j;
}

}  // namespace ofnav
