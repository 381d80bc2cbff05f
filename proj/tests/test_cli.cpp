#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "ofnav/eval.hpp"
#include "ofnav/image_io.hpp"
#include "ofnav/scenario.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;

namespace ofnav {
namespace {

struct RunResult {
  int code{-1};
  std::string output;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("ofnav_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  RunResult run(const std::string& args) const {
    const fs::path log = dir_ / "cli_output.txt";
    const std::string cmd = std::string("\"") + OFNAV_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    r.output = ss.str();
    return r;
  }

  fs::path write_config(const ScenarioConfig& c, const std::string& name) const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << scenario_to_json(c).dump(2);
    return p;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

ScenarioConfig short_hover() {
  ScenarioConfig c = default_hover_scenario();
  c.duration = 4.0;
  return c;
}

TEST_F(Cli, NegativeStdIsConfigError) {
  std::ofstream(dir_ / "bad.json") << R"({"scenario": "hover", "noise": {"gps_horizontal_std": -1}})";
  const RunResult r = run("simulate --config " + (dir_ / "bad.json").string() + " --out " + (dir_ / "b").string());
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_NE(r.output.find("gps_horizontal_std"), std::string::npos) << r.output;
}

TEST_F(Cli, UsageErrorIsConfigError) {
  EXPECT_EQ(run("simulate --out x").code, 2);
  EXPECT_EQ(run("no-such-command").code, 2);
}

TEST_F(Cli, FlowRejectsBadFrames) {
  std::ofstream(dir_ / "a.pgm") << "this is not an image";
  write_pgm(dir_ / "b.pgm", Image::Constant(32, 32, 0.5));
  write_pgm(dir_ / "c.pgm", Image::Constant(24, 32, 0.5));
  EXPECT_EQ(run("flow " + (dir_ / "a.pgm").string() + " " + (dir_ / "b.pgm").string()).code, 2);
  EXPECT_EQ(run("flow " + (dir_ / "b.pgm").string() + " " + (dir_ / "c.pgm").string()).code, 2);
  EXPECT_EQ(run("flow " + (dir_ / "b.pgm").string() + " " + (dir_ / "b.pgm").string() + " --levels 0").code, 2);
}

TEST_F(Cli, FlowRecoversShift) {
  const test::WaveTexture tex(5);
  write_pgm(dir_ / "a.pgm", tex.render(128, 0.0, 0.0));
  write_pgm(dir_ / "b.pgm", tex.render(128, 3.0, 0.0));
  const fs::path out = dir_ / "flow";
  const RunResult r = run("flow " + (dir_ / "a.pgm").string() + " " + (dir_ / "b.pgm").string() +
                          " --dt 1 --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.output;
  ASSERT_TRUE(fs::exists(out / "flow.svg"));
  // Median over the interior rows of flow.csv (x, y, vx, vy).
  std::ifstream in(out / "flow.csv");
  std::string line;
  std::getline(in, line);
  std::vector<double> vx, vy;
  while (std::getline(in, line)) {
    double x, y, u, v;
    char c;
    std::istringstream ss(line);
    ss >> x >> c >> y >> c >> u >> c >> v;
    if (x >= 16 && x < 112 && y >= 16 && y < 112) {
      vx.push_back(u);
      vy.push_back(v);
    }
  }
  ASSERT_FALSE(vx.empty());
  EXPECT_NEAR(test::median(vx), 3.0, 0.1);
  EXPECT_NEAR(test::median(vy), 0.0, 0.1);
}

TEST_F(Cli, CorruptedSensorLogNamesTheLine) {
  const fs::path b = dir_ / "bundle";
  ASSERT_EQ(run("simulate --config " + write_config(short_hover(), "c.json").string() + " --out " + b.string()).code, 0);
  {
    std::ifstream in(b / "sensors.jsonl");
    std::ofstream out(dir_ / "tmp.jsonl");
    std::string line;
    for (int n = 1; std::getline(in, line); ++n) out << (n == 42 ? line.substr(0, line.size() / 2) : line) << '\n';
  }
  fs::rename(dir_ / "tmp.jsonl", b / "sensors.jsonl");
  const RunResult r = run("fuse " + b.string());
  EXPECT_EQ(r.code, 3) << r.output;
  EXPECT_NE(r.output.find("line 42"), std::string::npos) << r.output;
}

TEST_F(Cli, MissingFilesAreDataErrors) {
  EXPECT_EQ(run("fuse " + (dir_ / "nothing").string()).code, 3);
  EXPECT_EQ(run("eval " + (dir_ / "truth.csv").string() + " " + (dir_ / "nav.csv").string()).code, 3);
}

TEST_F(Cli, DisjointEvalRangesAreSemanticErrors) {
  std::ofstream(dir_ / "truth.csv") << "t,pos_n,pos_e,pos_d,vel_n,vel_e,vel_d,roll,pitch,yaw\n"
                                       "0,0,0,-10,0,0,0,0,0,0\n1,0,0,-10,0,0,0,0,0,0\n";
  std::ofstream(dir_ / "nav.csv") << "t,roll,pitch,yaw,vel_n,vel_d,vel_e,pos_n,pos_d,pos_e\n"
                                     "5,0,0,0,0,0,0,0,-10,0\n6,0,0,0,0,0,0,0,-10,0\n";
  const RunResult r = run("eval " + (dir_ / "truth.csv").string() + " " + (dir_ / "nav.csv").string());
  EXPECT_EQ(r.code, 4) << r.output;
}

TEST_F(Cli, SimulateAndFuseAreDeterministic) {
  const fs::path cfg = write_config(short_hover(), "c.json");
  for (const char* name : {"a", "b"}) {
    const fs::path b = dir_ / name;
    ASSERT_EQ(run("simulate --config " + cfg.string() + " --seed 11 --out " + b.string()).code, 0);
    ASSERT_EQ(run("fuse " + b.string() + " --use-flow").code, 0);
    ASSERT_EQ(run("fuse " + b.string() + " --no-flow").code, 0);
  }
  for (const char* f : {"sensors.jsonl", "truth.csv", "navlog_flow.csv", "navlog_noflow.csv",
                        "innovations_flow.csv", "innovations_noflow.csv"}) {
    const std::string a = slurp(dir_ / "a" / f);
    ASSERT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, slurp(dir_ / "b" / f)) << f;
  }
}

TEST_F(Cli, ZeroNoiseBundleTracksTruth) {
  ScenarioConfig c = zero_noise(short_hover());
  c.duration = 6.0;
  const fs::path b = dir_ / "bundle";
  ASSERT_EQ(run("simulate --config " + write_config(c, "c.json").string() + " --out " + b.string()).code, 0);
  ASSERT_EQ(run("fuse " + b.string()).code, 0);
  const auto truth = read_truth_csv(b / "truth.csv");
  const auto est = read_navlog_csv(b / "navlog_flow.csv");
  const RunMetrics m = evaluate_run(truth, est, reference_path(c));
  EXPECT_LT(m.final_error, 1e-6);

  const RunResult r = run("eval " + (b / "truth.csv").string() + " " + (b / "navlog_flow.csv").string() +
                          " --config " + (b / "config.json").string() + " --out " + (dir_ / "eval").string());
  ASSERT_EQ(r.code, 0) << r.output;
  for (const char* f : {"report.json", "xy.svg", "path_3d.svg", "attitude.svg", "velocity.svg"}) {
    EXPECT_TRUE(fs::exists(dir_ / "eval" / f)) << f;
  }
  const auto report = nlohmann::json::parse(slurp(dir_ / "eval" / "report.json"));
  EXPECT_EQ(report["runs"].size(), 1u);
}

}  // namespace
}  // namespace ofnav
