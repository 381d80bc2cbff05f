#pragma once

// Deterministic kinematic flight simulator: truth trajectories, noisy sensor
// streams and rendered downward-camera frames.

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "ofnav/geom.hpp"
#include "ofnav/measurement.hpp"
#include "ofnav/optflow.hpp"

namespace ofnav {

inline constexpr double kGravity = 9.80665;  // m/s^2, NED down-positive

struct TruthSample {
  double t{0};
  Vec3d position;         // NED m
  Vec3d velocity;         // NED m/s
  Quaterniond attitude;   // body -> NED
  Vec3d angular_rate;     // body rad/s, average over [t, t + dt]
  Vec3d specific_force;   // body m/s^2, average over [t, t + dt]
};

/// Uniformly sampled truth. Between consecutive samples the acceleration is
/// constant, so trapezoidal integration of velocity reproduces position exactly.
struct TruthTrajectory {
  double dt{0.01};
  std::vector<TruthSample> samples;

  [[nodiscard]] double start_time() const { return samples.front().t; }
  [[nodiscard]] double end_time() const { return samples.back().t; }
  /// Index of the sample nearest to t; throws RangeError outside the span.
  [[nodiscard]] std::size_t index_at(double t) const;
};

struct SensorNoiseConfig {
  double gyro_noise_density{0.0};   // rad/s/sqrt(Hz)
  double accel_noise_density{0.0};  // m/s^2/sqrt(Hz)
  Vec3d gyro_bias{Vec3d::Zero()};   // rad/s
  Vec3d accel_bias{Vec3d::Zero()};  // m/s^2
  double imu_rate_hz{100.0};

  double gps_horizontal_std{0.0};   // Gauss-Markov stationary 2-D RMS (N and E combined), m
  double gps_vertical_std{0.0};
  double gps_correlation_time{30.0};  // s
  double gps_white_std{0.0};        // additional white position noise, m
  double gps_velocity_std{0.0};     // m/s
  double gps_rate_hz{5.0};

  double baro_std{0.0};   // m
  double baro_rate_hz{20.0};
  double mag_std{0.0};    // gauss
  double mag_rate_hz{10.0};
  double camera_rate_hz{15.0};

  std::uint64_t seed{1};

  void validate() const;
};

struct GroundTexture {
  std::uint64_t seed{1};
  double base_wavelength{8.0};  // lattice spacing of the coarsest octave, m
  int octaves{7};
  double persistence{0.7};
  double contrast{2.5};

  /// Intensity in [0, 1] at a ground point. Octaves whose lattice is finer than
  /// about two pixels at the given footprint (m per pixel) are faded out.
  [[nodiscard]] double operator()(double north, double east, double footprint = 0.0) const;
};

// --- trajectories -----------------------------------------------------------------

struct HoverConfig {
  double rate_hz{100.0};
  double settle_time{5.0};       // static lead-in before dither starts, s
  double dither_std{0.15};       // m per horizontal axis
  double dither_bandwidth{0.5};  // Hz
  double dither_vertical_std{0.05};
  std::uint64_t seed{1};
};

TruthTrajectory hover_trajectory(double duration, const Vec3d& hold_position, const HoverConfig& config);

struct MissionConfig {
  double rate_hz{100.0};
  double settle_time{5.0};   // static lead-in at the first waypoint, s
  double accel_limit{1.0};   // m/s^2 for the trapezoidal speed profile
  double vertical_speed{1.5};
  double yaw_rate{0.5};      // rad/s peak during in-place turns
  double tilt_smoothing{0.5};  // s, window for the thrust-direction filter
};

/// Stop-and-go straight segments with trapezoidal speed profiles, yaw aligned with
/// the horizontal track, in-place turns whenever the heading changes.
TruthTrajectory waypoint_trajectory(const std::vector<Vec3d>& waypoints, double cruise_speed,
                                    const MissionConfig& config);

/// Duration of one trapezoidal (or triangular) profile over `distance`.
double trapezoid_duration(double distance, double cruise_speed, double accel_limit);

/// Home -> field centre -> far point -> 180 deg turn -> home, with climb and descent.
std::vector<Vec3d> default_mission_waypoints(double start_altitude = 2.0, double cruise_altitude = 10.0,
                                             double leg_length = 40.0);

// --- sensors ----------------------------------------------------------------------

/// Seeded random stream whose sequence depends only on (seed, name).
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view name);
  double normal();
  double uniform();

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Increment from truth sample `k` to `k + 1` as an IMU would report it at t[k+1].
ImuSample sample_imu(const TruthTrajectory& truth, std::size_t k, const SensorNoiseConfig& noise, RngStream& rng);

/// GPS position error as a first-order Gauss-Markov process, stepped per fix.
/// Per-axis Gauss-Markov std: the horizontal RMS split evenly over N and E.
Vec3d gps_axis_std(const SensorNoiseConfig& noise);

class GpsErrorModel {
 public:
  GpsErrorModel(const SensorNoiseConfig& noise, RngStream& rng);
  Vec3d step(double dt);
  [[nodiscard]] const Vec3d& current() const { return error_; }

 private:
  const SensorNoiseConfig* noise_;
  RngStream* rng_;
  Vec3d error_;
};

GpsFix sample_gps(const TruthTrajectory& truth, double t, const Vec3d& correlated_error,
                  const SensorNoiseConfig& noise, const GeoOrigin& origin, RngStream& rng);
BaroSample sample_baro(const TruthTrajectory& truth, double t, const SensorNoiseConfig& noise, RngStream& rng);
MagSample sample_mag(const TruthTrajectory& truth, double t, const Vec3d& earth_field,
                     const SensorNoiseConfig& noise, RngStream& rng);

// --- camera -----------------------------------------------------------------------

struct RenderResult {
  ImageFrame frame;
  bool degraded{false};  // some rays miss the ground
};

RenderResult render_ground_image(const TruthSample& pose, const GroundTexture& texture, const CameraIntrinsics& intr);

}  // namespace ofnav
