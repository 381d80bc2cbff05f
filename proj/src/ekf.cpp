#include "ofnav/ekf.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace ofnav {

namespace si = state_index;

namespace {

const Vec3d kGravityNed(0.0, 0.0, 9.80665);

void normalize_quaternion(StateVector& x) {
  x.segment<4>(si::kQuat) = quat_normalize(x.segment<4>(si::kQuat));
}

void clamp_biases(StateVector& x) {
  x.segment<3>(si::kDangBias) = x.segment<3>(si::kDangBias).cwiseMax(-kMaxDangBias).cwiseMin(kMaxDangBias);
  x.segment<3>(si::kDvelBias) = x.segment<3>(si::kDvelBias).cwiseMax(-kMaxDvelBias).cwiseMin(kMaxDvelBias);
}

void require_finite(const StateVector& x, const char* where) {
  if (!x.allFinite()) throw NumericalFault(std::string(where) + ": non-finite state");
}

// Sensitivity of a quaternion to a small NED-frame rotation applied on the left.
Eigen::Matrix<double, 4, 3> attitude_error_jacobian(const Quaterniond& q) {
  Eigen::Matrix<double, 4, 3> j;
  for (int i = 0; i < 3; ++i) {
    Vec3d d = Vec3d::Zero();
    d(i) = 1e-6;
    j.col(i) = (quat_mul(quat_from_delta_angle(d), q) - quat_mul(quat_from_delta_angle(Vec3d(-d)), q)) / 2e-6;
  }
  return j;
}

}  // namespace

double chi_square_99(Eigen::Index dof) {
  switch (dof) {
    case 1: return 6.634896601021214;
    case 2: return 9.210340371976180;
    case 3: return 11.344866730144373;
    default: throw InvalidParameter("chi_square_99: only 1..3 degrees of freedom are tabulated");
  }
}

// --- models ------------------------------------------------------------------------

StateVector propagate_state(const StateVector& x, const ImuSample& imu) {
  const NavState s(x);
  const Vec3d dang = imu.delta_angle - s.dang_bias();
  const Vec3d dvel = imu.delta_velocity - s.dvel_bias();

  const Quaterniond q = s.q();
  const Quaterniond q_mid = quat_mul(q, quat_from_delta_angle(Vec3d(0.5 * dang)));
  const Vec3d v_prev = s.v();
  const Vec3d v_next = v_prev + quat_to_rot(q_mid) * dvel + kGravityNed * imu.dt;

  NavState out(x);
  out.q() = quat_normalize(quat_mul(q, quat_from_delta_angle(dang)));
  out.v() = v_next;
  out.p() = s.p() + v_prev * imu.dt + 0.5 * (v_next - v_prev) * imu.dt;
  return out.x;
}

Eigen::VectorXd predict_measurement(const StateVector& x, MeasurementKind kind) {
  const NavState s(x);
  switch (kind) {
    case MeasurementKind::GpsPos: return s.p();
    case MeasurementKind::GpsVel: return s.v();
    case MeasurementKind::Baro: return Eigen::VectorXd::Constant(1, -s.p().z());
    case MeasurementKind::Mag: return quat_to_rot(s.q()).transpose() * s.mag_earth() + s.mag_body();
    case MeasurementKind::FlowVel: return (quat_to_rot(s.q()).transpose() * s.v()).head<2>();
  }
  throw InvalidInput("predict_measurement: unknown measurement kind");
}

StateMatrix state_transition_jacobian(const StateVector& x, const ImuSample& imu, double step) {
  StateMatrix f;
  for (int j = 0; j < kStateDim; ++j) {
    StateVector xp = x, xm = x;
    xp(j) += step;
    xm(j) -= step;
    normalize_quaternion(xp);
    normalize_quaternion(xm);
    f.col(j) = (propagate_state(xp, imu) - propagate_state(xm, imu)) / (2.0 * step);
  }
  return f;
}

Eigen::Matrix<double, kStateDim, 6> input_jacobian(const StateVector& x, const ImuSample& imu, double step) {
  Eigen::Matrix<double, kStateDim, 6> g;
  for (int j = 0; j < 6; ++j) {
    ImuSample up = imu, um = imu;
    if (j < 3) {
      up.delta_angle(j) += step;
      um.delta_angle(j) -= step;
    } else {
      up.delta_velocity(j - 3) += step;
      um.delta_velocity(j - 3) -= step;
    }
    g.col(j) = (propagate_state(x, up) - propagate_state(x, um)) / (2.0 * step);
  }
  return g;
}

Eigen::MatrixXd measurement_jacobian(const StateVector& x, MeasurementKind kind, double step) {
  const Eigen::Index m = measurement_dim(kind);
  Eigen::MatrixXd h(m, kStateDim);
  for (int j = 0; j < kStateDim; ++j) {
    StateVector xp = x, xm = x;
    xp(j) += step;
    xm(j) -= step;
    normalize_quaternion(xp);
    normalize_quaternion(xm);
    h.col(j) = (predict_measurement(xp, kind) - predict_measurement(xm, kind)) / (2.0 * step);
  }
  return h;
}

// --- filter steps ------------------------------------------------------------------

void check_covariance_health(StateMatrix& P) {
  P = 0.5 * (P + P.transpose()).eval();
  if (!P.allFinite()) throw NumericalFault("covariance became non-finite");
  Eigen::LLT<StateMatrix> llt(P + 1e-6 * StateMatrix::Identity());
  if (llt.info() != Eigen::Success) throw NumericalFault("covariance has an eigenvalue below -1e-6");
}

std::pair<NavState, NavCovariance> init_state(const Measurement& first_gps, const Measurement& first_mag,
                                              const Vec3d& accel_avg, const FilterConfig& config,
                                              const std::optional<Measurement>& first_gps_vel) {
  if (first_gps.kind != MeasurementKind::GpsPos || first_mag.kind != MeasurementKind::Mag) {
    throw InvalidInput("init_state: expected a GPS position and a magnetometer measurement");
  }
  first_gps.validate();
  first_mag.validate();
  const double g = accel_avg.norm();
  if (!(g >= 0.8 * 9.80665 && g <= 1.2 * 9.80665)) {
    throw NotStatic("init_state: averaged specific force is not close to 1 g; vehicle not static");
  }

  // Specific force at rest is -g expressed in body axes.
  EulerAnglesd e;
  e.roll = std::atan2(-accel_avg.y(), -accel_avg.z());
  e.pitch = std::atan2(accel_avg.x(), std::hypot(accel_avg.y(), accel_avg.z()));

  // Level the magnetometer reading, then compare with the earth field's declination.
  const Mat3d tilt = quat_to_rot(quat_from_euler(EulerAnglesd{e.roll, e.pitch, 0.0}));
  const Vec3d m_level = tilt * Vec3d(first_mag.value);
  const Vec3d& earth = config.init.earth_field;
  e.yaw = wrap_pi(std::atan2(earth.y(), earth.x()) - std::atan2(m_level.y(), m_level.x()));

  NavState s;
  s.q() = quat_from_euler(e);
  s.p() = first_gps.value;
  if (first_gps_vel) {
    first_gps_vel->validate();
    s.v() = first_gps_vel->value;
  }
  s.mag_earth() = earth;

  const InitConfig& ic = config.init;
  NavCovariance c;
  const Eigen::Matrix<double, 4, 3> ja = attitude_error_jacobian(s.q());
  const Vec3d att_var(ic.tilt_std * ic.tilt_std, ic.tilt_std * ic.tilt_std, ic.yaw_std * ic.yaw_std);
  c.P.block<4, 4>(si::kQuat, si::kQuat) = ja * att_var.asDiagonal() * ja.transpose();
  c.P.block<4, 4>(si::kQuat, si::kQuat).diagonal().array() += 1e-6 * att_var.minCoeff();
  const auto set_diag = [&c](int start, int n, double std) {
    for (int i = 0; i < n; ++i) c.P(start + i, start + i) = std * std;
  };
  set_diag(si::kVel, 3, ic.vel_std);
  set_diag(si::kPos, 2, ic.pos_std_horizontal);
  set_diag(si::kPos + 2, 1, ic.pos_std_vertical);
  set_diag(si::kDangBias, 3, ic.dang_bias_std);
  set_diag(si::kDvelBias, 3, ic.dvel_bias_std);
  set_diag(si::kWind, 2, ic.wind_std);
  set_diag(si::kMagEarth, 3, ic.mag_earth_std);
  set_diag(si::kMagBody, 3, ic.mag_body_std);
  return {s, c};
}

std::pair<NavState, NavCovariance> predict(const NavState& state, const NavCovariance& cov, const ImuSample& imu,
                                           const FilterConfig& config) {
  imu.validate();
  require_finite(state.x, "predict");

  NavState next(propagate_state(state.x, imu));
  clamp_biases(next.x);
  require_finite(next.x, "predict");

  const StateMatrix f = state_transition_jacobian(state.x, imu);
  const Eigen::Matrix<double, kStateDim, 6> g = input_jacobian(state.x, imu);

  const ProcessNoise& pn = config.process;
  Eigen::Matrix<double, 6, 1> input_var;
  input_var.head<3>().setConstant(pn.gyro_noise * pn.gyro_noise * imu.dt);
  input_var.tail<3>().setConstant(pn.accel_noise * pn.accel_noise * imu.dt);

  StateMatrix q = g * input_var.asDiagonal() * g.transpose();
  const auto add_rw = [&q, &imu](int start, int n, double density) {
    for (int i = 0; i < n; ++i) q(start + i, start + i) += density * density * imu.dt;
  };
  add_rw(si::kDangBias, 3, pn.dang_bias_density);
  add_rw(si::kDvelBias, 3, pn.dvel_bias_density);
  add_rw(si::kWind, 2, pn.wind_density);
  add_rw(si::kMagEarth, 3, pn.mag_earth_density);
  add_rw(si::kMagBody, 3, pn.mag_body_density);

  NavCovariance out;
  out.P.noalias() = f * cov.P * f.transpose();
  out.P += q;
  // The mechanization normalizes q, which removes all variance along q itself;
  // keep a tiny floor so every diagonal entry stays positive.
  const double q_trace = out.P.block<4, 4>(si::kQuat, si::kQuat).trace();
  out.P.block<4, 4>(si::kQuat, si::kQuat).diagonal().array() += 1e-9 * q_trace;
  check_covariance_health(out.P);
  return {next, out};
}

UpdateResult update(const NavState& state, const NavCovariance& cov, const Measurement& meas,
                    const FilterConfig& config) {
  meas.validate();
  require_finite(state.x, "update");

  const Eigen::VectorXd predicted = predict_measurement(state.x, meas.kind);
  const Eigen::MatrixXd h = measurement_jacobian(state.x, meas.kind);
  const Eigen::VectorXd y = meas.value - predicted;
  const Eigen::MatrixXd r = meas.noise_std.array().square().matrix().asDiagonal();

  const Eigen::MatrixXd ph = cov.P * h.transpose();
  Eigen::MatrixXd s = h * ph + r;
  s = 0.5 * (s + s.transpose()).eval();
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all()) {
    throw NumericalFault("update: innovation covariance is singular for " + std::string(to_string(meas.kind)));
  }

  UpdateResult out{state, cov, {}};
  out.record.kind = meas.kind;
  out.record.timestamp = meas.timestamp;
  out.record.innovation = y;
  out.record.innovation_variance = s.diagonal();
  out.record.nis = y.dot(ldlt.solve(y));
  if (config.innovation_gating && out.record.nis > chi_square_99(y.size())) {
    out.record.accepted = false;
    return out;
  }
  out.record.accepted = true;

  const Eigen::MatrixXd k = ldlt.solve(ph.transpose()).transpose();
  out.state.x += k * y;
  normalize_quaternion(out.state.x);
  clamp_biases(out.state.x);
  require_finite(out.state.x, "update");

  const StateMatrix ikh = StateMatrix::Identity() - k * h;
  out.cov.P = ikh * cov.P * ikh.transpose() + k * r * k.transpose();
  check_covariance_health(out.cov.P);
  return out;
}

OutputVector output_vector(const NavState& state, double nominal_imu_dt) {
  const EulerAnglesd e = euler_from_quat(state.q());
  const Vec3d v = state.v(), p = state.p();
  const Vec3d gb = state.dang_bias() / nominal_imu_dt;
  OutputVector o;
  o.roll = e.roll;
  o.pitch = e.pitch;
  o.yaw = e.yaw;
  o.vel_n = v.x();
  o.vel_d = v.z();
  o.vel_e = v.y();
  o.pos_n = p.x();
  o.pos_d = p.z();
  o.pos_e = p.y();
  o.gyro_bias_x = gb.x();
  o.gyro_bias_y = gb.y();
  o.gyro_bias_z = gb.z();
  return o;
}

std::string state_csv_header() {
  static constexpr const char* names[kStateDim] = {
      "q0",     "q1",     "q2",     "q3",     "vn",     "ve",     "vd",    "pn",
      "pe",     "pd",     "dang_bx", "dang_by", "dang_bz", "dvel_bx", "dvel_by", "dvel_bz",
      "wind_n", "wind_e", "mag_n",  "mag_e",  "mag_d",  "mag_bx", "mag_by", "mag_bz"};
  std::ostringstream out;
  out << "t";
  for (const char* n : names) out << ',' << n;
  for (const char* n : names) out << ",var_" << n;
  return out.str();
}

std::string state_csv_row(double timestamp, const NavState& state, const NavCovariance& cov) {
  std::string row;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", timestamp);
  row += buf;
  for (int i = 0; i < kStateDim; ++i) {
    std::snprintf(buf, sizeof buf, ",%.17g", state.x(i));
    row += buf;
  }
  for (int i = 0; i < kStateDim; ++i) {
    std::snprintf(buf, sizeof buf, ",%.17g", cov.P(i, i));
    row += buf;
  }
  return row;
}

// --- NavFilter ----------------------------------------------------------------------

void NavFilter::initialize(const Measurement& first_gps, const Measurement& first_mag, const Vec3d& accel_avg,
                           const std::optional<Measurement>& first_gps_vel) {
  std::tie(state_, cov_) = init_state(first_gps, first_mag, accel_avg, config_, first_gps_vel);
  initialized_ = true;
}

void NavFilter::predict(const ImuSample& imu) {
  std::tie(state_, cov_) = ofnav::predict(state_, cov_, imu, config_);
}

InnovationRecord NavFilter::update(const Measurement& meas) {
  UpdateResult r = ofnav::update(state_, cov_, meas, config_);
  state_ = r.state;
  cov_ = r.cov;
  return r.record;
}

}  // namespace ofnav
