#pragma once

// Truth/estimate alignment and the comparison metrics: hover scatter, cross-track
// error against the reference path, per-axis RMSE, attitude smoothness, NEES.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ofnav/ekf.hpp"
#include "ofnav/fusion.hpp"
#include "ofnav/sim.hpp"

namespace ofnav {

struct TruthRow {
  double t{0};
  Vec3d position{Vec3d::Zero()};  // NED
  Vec3d velocity{Vec3d::Zero()};  // NED
  Vec3d attitude{Vec3d::Zero()};  // roll, pitch, yaw
};

struct EstimateRow {
  double t{0};
  Vec3d position{Vec3d::Zero()};  // NED
  Vec3d velocity{Vec3d::Zero()};  // NED
  Vec3d attitude{Vec3d::Zero()};  // roll, pitch, yaw
};

/// truth.csv: t, pos_n, pos_e, pos_d, vel_n, vel_e, vel_d, q0..q3, roll, pitch, yaw.
void write_truth_csv(const std::filesystem::path& path, const TruthTrajectory& truth);
std::vector<TruthRow> read_truth_csv(const std::filesystem::path& path);
std::vector<TruthRow> truth_rows(const TruthTrajectory& truth);

std::vector<EstimateRow> read_navlog_csv(const std::filesystem::path& path);
std::vector<EstimateRow> estimate_rows(const NavLog& log);

/// Estimates paired with truth linearly interpolated to the estimate epochs.
struct AlignedRun {
  std::vector<double> t;
  std::vector<Vec3d> est_pos, true_pos;
  std::vector<Vec3d> est_vel, true_vel;
  std::vector<Vec3d> est_att, true_att;

  [[nodiscard]] std::size_t size() const { return t.size(); }
};

/// Keeps the estimate rows inside the truth span. Throws RangeError when the
/// time ranges do not overlap.
AlignedRun align(const std::vector<TruthRow>& truth, const std::vector<EstimateRow>& est);

/// RMS horizontal distance of the points from their mean.
double horizontal_scatter(const std::vector<Vec3d>& positions);

/// True when the points fit in a +-half_width box (N and E), i.e. the
/// horizontal extent along each axis is at most 2 * half_width.
bool inside_box(const std::vector<Vec3d>& positions, double half_width);

/// Horizontal distance from `p` to the polyline through `path` (a single point is allowed).
double cross_track_distance(const Vec3d& p, const std::vector<Vec3d>& path);

struct CrossTrack {
  double max{0};
  double mean{0};
};
CrossTrack cross_track_error(const std::vector<Vec3d>& positions, const std::vector<Vec3d>& path);

/// Root-mean-square estimation error per NED axis.
Vec3d rmse_per_axis(const AlignedRun& run);

/// Epochs whose true horizontal speed is at least `min_speed`.
std::vector<bool> cruise_mask(const AlignedRun& run, double min_speed);

/// Std of epoch-to-epoch roll and pitch increments over the masked epochs,
/// pooled over both axes (rad).
double attitude_increment_std(const std::vector<Vec3d>& attitude, const std::vector<bool>& mask);

/// e^T P^-1 e.
double nees(const Vec3d& error, const Mat3d& cov);

/// Average position NEES of a fused run against truth.
double average_position_nees(const NavLog& log, const TruthTrajectory& truth);

/// Two-sided 95 % band for the average of `runs` chi-square(dof) variables.
std::pair<double, double> nees_band_95(int dof, int runs);

struct RunMetrics {
  std::string label;
  std::uint64_t seed{0};
  bool use_flow{false};
  double scatter{0};
  bool inside_box{false};
  double max_cross_track{0};
  double mean_cross_track{0};
  Vec3d rmse{Vec3d::Zero()};
  double final_error{0};
  double attitude_smoothness{0};
  std::vector<double> t;              // decimated error series
  std::vector<Vec3d> error;
};

struct MetricOptions {
  double box_half_width{1.25};
  double cruise_speed_threshold{2.0};
  std::size_t series_stride{10};
};

RunMetrics evaluate_run(const std::vector<TruthRow>& truth, const std::vector<EstimateRow>& est,
                        const std::vector<Vec3d>& path, const MetricOptions& options = {});

struct ExperimentReport {
  std::string scenario_id;
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
  std::vector<RunMetrics> runs;

  [[nodiscard]] nlohmann::json to_json() const;
};

}  // namespace ofnav
