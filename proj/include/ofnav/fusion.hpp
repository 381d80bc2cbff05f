#pragma once

// Event-ordered fusion: merges multi-rate sensor streams and drives the EKF,
// turning consecutive camera frames into body-velocity updates.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ofnav/ekf.hpp"
#include "ofnav/geom.hpp"
#include "ofnav/measurement.hpp"
#include "ofnav/optflow.hpp"

namespace ofnav {

struct NamedStream {
  std::string name;
  std::vector<SensorSample> samples;
};

/// k-way merge into one non-decreasing timeline. Equal timestamps are ordered
/// imu, baro, mag, gps, camera. Throws InvalidInput naming the first stream
/// that is not time-ordered.
std::vector<SensorSample> merge_streams(const std::vector<NamedStream>& streams);

struct FusionConfig {
  bool use_flow{true};
  FilterConfig filter;
  FlowParams flow;
  CameraIntrinsics camera;
  GeoOrigin origin;
  double init_window{1.0};           // s of static IMU data averaged for leveling
  int flow_border_margin{8};         // px excluded around the image for the median
  double min_texture_strength{1e-14};  // flow updates below this are skipped
  bool fuse_gps_velocity{false};
  /// Anchor the horizontal origin at the first GPS fix used for initialization
  /// (the takeoff/home point); altitude stays referenced to `origin`.
  bool home_from_first_fix{true};
  /// Record the symmetry and smallest eigenvalue of P at every epoch (slow).
  bool audit_covariance{false};
};

/// State after all events of one IMU epoch.
struct NavRecord {
  double t{0};
  OutputVector out;
  StateVector x;
  StateVector variance;  // diagonal of P
  Mat3d position_cov;    // NED block of P
  double cov_asymmetry{0};       // max |P - P^T|, audit only
  double cov_min_eigenvalue{0};  // audit only
};

struct FaultRecord {
  double t{0};
  std::string message;
};

struct NavLog {
  std::vector<NavRecord> records;
  std::vector<InnovationRecord> innovations;
  std::optional<FaultRecord> fault;
  std::size_t flow_computations{0};
  std::size_t flow_updates{0};
  std::size_t flow_low_texture{0};
};

/// Runs the filter over a merged timeline. The first `init_window` seconds must
/// be static. Throws NotStatic / InvalidInput when initialization fails; a
/// numerical fault stops the run and is recorded in NavLog::fault.
NavLog run_fusion(const std::vector<SensorSample>& timeline, const FusionConfig& config);

/// Converts a GPS fix into position and velocity measurements in the local frame.
Measurement gps_position_measurement(const GpsFix& fix, const GeoOrigin& origin, const MeasurementNoise& noise);
Measurement gps_velocity_measurement(const GpsFix& fix, const MeasurementNoise& noise);

/// NavLog CSV: t, roll, pitch, yaw, vel_n, vel_d, vel_e, pos_n, pos_d, pos_e,
/// gyro_bias_x..z, then var_<state> for all 24 states.
std::string navlog_csv_header();
void write_navlog_csv(const std::filesystem::path& path, const NavLog& log);

/// t, kind, accepted, nis, innovation components, innovation variances.
void write_innovations_csv(const std::filesystem::path& path, const NavLog& log);

}  // namespace ofnav
