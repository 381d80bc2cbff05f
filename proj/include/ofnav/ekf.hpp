#pragma once

// 24-state full-state extended Kalman filter: strapdown inertial prediction and
// GPS / barometer / magnetometer / optical-flow velocity updates.
//
// State layout (fixed):
//   [0..3]   attitude quaternion q0..q3 (body -> NED)
//   [4..6]   velocity N, E, D            m/s
//   [7..9]   position N, E, D            m
//   [10..12] delta-angle bias            rad per IMU interval
//   [13..15] delta-velocity bias         m/s per IMU interval
//   [16..17] wind N, E                   m/s
//   [18..20] earth magnetic field N,E,D  gauss
//   [21..23] body magnetic field x,y,z   gauss

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>

#include "ofnav/geom.hpp"
#include "ofnav/measurement.hpp"

namespace ofnav {

inline constexpr int kStateDim = 24;
using StateVector = Eigen::Matrix<double, kStateDim, 1>;
using StateMatrix = Eigen::Matrix<double, kStateDim, kStateDim>;

namespace state_index {
inline constexpr int kQuat = 0;
inline constexpr int kVel = 4;
inline constexpr int kPos = 7;
inline constexpr int kDangBias = 10;
inline constexpr int kDvelBias = 13;
inline constexpr int kWind = 16;
inline constexpr int kMagEarth = 18;
inline constexpr int kMagBody = 21;
}  // namespace state_index

inline constexpr double kMaxDangBias = 0.05;  // rad
inline constexpr double kMaxDvelBias = 2.0;   // m/s

struct NavState {
  StateVector x{StateVector::Zero()};

  NavState() { x(state_index::kQuat) = 1.0; }
  explicit NavState(const StateVector& v) : x(v) {}

  auto q() { return x.segment<4>(state_index::kQuat); }
  auto v() { return x.segment<3>(state_index::kVel); }
  auto p() { return x.segment<3>(state_index::kPos); }
  auto dang_bias() { return x.segment<3>(state_index::kDangBias); }
  auto dvel_bias() { return x.segment<3>(state_index::kDvelBias); }
  auto wind() { return x.segment<2>(state_index::kWind); }
  auto mag_earth() { return x.segment<3>(state_index::kMagEarth); }
  auto mag_body() { return x.segment<3>(state_index::kMagBody); }

  [[nodiscard]] Quaterniond q() const { return x.segment<4>(state_index::kQuat); }
  [[nodiscard]] Vec3d v() const { return x.segment<3>(state_index::kVel); }
  [[nodiscard]] Vec3d p() const { return x.segment<3>(state_index::kPos); }
  [[nodiscard]] Vec3d dang_bias() const { return x.segment<3>(state_index::kDangBias); }
  [[nodiscard]] Vec3d dvel_bias() const { return x.segment<3>(state_index::kDvelBias); }
  [[nodiscard]] Vec2d wind() const { return x.segment<2>(state_index::kWind); }
  [[nodiscard]] Vec3d mag_earth() const { return x.segment<3>(state_index::kMagEarth); }
  [[nodiscard]] Vec3d mag_body() const { return x.segment<3>(state_index::kMagBody); }
};

struct NavCovariance {
  StateMatrix P{StateMatrix::Zero()};
};

struct InitConfig {
  double pos_std_horizontal{0.05};  // m; the first fix defines the horizontal origin
  double pos_std_vertical{2.5};
  double vel_std{0.5};
  double tilt_std{0.05};  // rad
  double yaw_std{0.1};    // rad
  double dang_bias_std{1e-4};
  double dvel_bias_std{5e-4};
  double wind_std{1e-3};
  double mag_earth_std{5e-4};
  double mag_body_std{5e-4};
  Vec3d earth_field{0.22, 0.0, 0.41};  // NED gauss
};

/// Noise densities driving the prediction covariance.
struct ProcessNoise {
  double gyro_noise{1e-3};         // rad/s/sqrt(Hz), mapped through the mechanization
  double accel_noise{0.03};        // m/s^2/sqrt(Hz), mapped through the mechanization
  double dang_bias_density{1e-7};  // rad/sqrt(s)
  double dvel_bias_density{2e-6};  // m/s/sqrt(s)
  double wind_density{1e-6};       // m/s/sqrt(s); wind is unobservable without airspeed
  double mag_earth_density{1e-5};  // gauss/sqrt(s)
  double mag_body_density{1e-5};   // gauss/sqrt(s)
};

struct MeasurementNoise {
  double gps_pos_horizontal{4.0};  // m
  double gps_pos_vertical{2.5};    // m
  double gps_vel{0.3};             // m/s
  double baro{0.8};                // m
  double mag{0.005};               // gauss
  double flow_vel{0.05};           // m/s
};

struct FilterConfig {
  InitConfig init;
  ProcessNoise process;
  MeasurementNoise measurement;
  double nominal_imu_dt{0.01};
  bool innovation_gating{true};
};

/// Chi-square 99 % quantile for 1..3 degrees of freedom.
double chi_square_99(Eigen::Index dof);

struct InnovationRecord {
  MeasurementKind kind{MeasurementKind::GpsPos};
  double timestamp{0};
  Eigen::VectorXd innovation;
  Eigen::VectorXd innovation_variance;  // diagonal of H P H^T + R
  double nis{0};
  bool accepted{false};
};

struct OutputVector {
  double roll{0}, pitch{0}, yaw{0};
  double vel_n{0}, vel_d{0}, vel_e{0};
  double pos_n{0}, pos_d{0}, pos_e{0};
  double gyro_bias_x{0}, gyro_bias_y{0}, gyro_bias_z{0};
};

/// Strapdown mechanization f(x, u) for one IMU interval.
StateVector propagate_state(const StateVector& x, const ImuSample& imu);

/// Measurement model g(x).
Eigen::VectorXd predict_measurement(const StateVector& x, MeasurementKind kind);

/// Central-difference Jacobians (step 1e-6 unless given) with the quaternion
/// re-normalized inside every perturbation.
StateMatrix state_transition_jacobian(const StateVector& x, const ImuSample& imu, double step = 1e-6);
Eigen::Matrix<double, kStateDim, 6> input_jacobian(const StateVector& x, const ImuSample& imu, double step = 1e-6);
Eigen::MatrixXd measurement_jacobian(const StateVector& x, MeasurementKind kind, double step = 1e-6);

std::pair<NavState, NavCovariance> init_state(const Measurement& first_gps, const Measurement& first_mag,
                                              const Vec3d& accel_avg, const FilterConfig& config,
                                              const std::optional<Measurement>& first_gps_vel = std::nullopt);

std::pair<NavState, NavCovariance> predict(const NavState& state, const NavCovariance& cov, const ImuSample& imu,
                                           const FilterConfig& config);

struct UpdateResult {
  NavState state;
  NavCovariance cov;
  InnovationRecord record;
};

UpdateResult update(const NavState& state, const NavCovariance& cov, const Measurement& meas,
                    const FilterConfig& config);

OutputVector output_vector(const NavState& state, double nominal_imu_dt);

/// Re-symmetrizes P and throws NumericalFault when it is non-finite or has an
/// eigenvalue below -1e-6.
void check_covariance_health(StateMatrix& P);

/// CSV snapshot: timestamp, the 24 states, the 24 diagonal variances.
std::string state_csv_header();
std::string state_csv_row(double timestamp, const NavState& state, const NavCovariance& cov);

/// Stateful wrapper used by the fusion runtime.
class NavFilter {
 public:
  explicit NavFilter(FilterConfig config) : config_(std::move(config)) {}

  void initialize(const Measurement& first_gps, const Measurement& first_mag, const Vec3d& accel_avg,
                  const std::optional<Measurement>& first_gps_vel = std::nullopt);
  void predict(const ImuSample& imu);
  InnovationRecord update(const Measurement& meas);

  [[nodiscard]] bool initialized() const { return initialized_; }
  [[nodiscard]] const NavState& state() const { return state_; }
  [[nodiscard]] const NavCovariance& covariance() const { return cov_; }
  [[nodiscard]] const FilterConfig& config() const { return config_; }

 private:
  FilterConfig config_;
  NavState state_;
  NavCovariance cov_;
  bool initialized_{false};
};

}  // namespace ofnav
