#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "ofnav/ekf.hpp"
#include "ofnav/sim.hpp"

namespace ofnav {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

Measurement make(MeasurementKind kind, const Eigen::VectorXd& value, const Eigen::VectorXd& std, double t = 0.0) {
  Measurement m;
  m.kind = kind;
  m.timestamp = t;
  m.value = value;
  m.noise_std = std;
  return m;
}

Measurement gps_at(const Vec3d& p, double std_h = 4.0, double std_v = 2.5) {
  return make(MeasurementKind::GpsPos, p, Vec3d(std_h, std_h, std_v));
}

Measurement mag_for(const Quaterniond& q, const Vec3d& earth = Vec3d(0.22, 0.0, 0.41)) {
  return make(MeasurementKind::Mag, quat_to_rot(q).transpose() * earth, Vec3d::Constant(0.005));
}

Vec3d specific_force_at_rest(const Quaterniond& q) { return quat_to_rot(q).transpose() * Vec3d(0, 0, -kGravity); }

ImuSample imu(const Vec3d& dang, const Vec3d& dvel, double dt = 0.01, double t = 0.0) {
  ImuSample s;
  s.timestamp = t;
  s.delta_angle = dang;
  s.delta_velocity = dvel;
  s.dt = dt;
  return s;
}

void expect_healthy(const NavState& s, const NavCovariance& c) {
  EXPECT_NEAR(s.q().norm(), 1.0, 1e-9);
  EXPECT_LE((c.P - c.P.transpose()).cwiseAbs().maxCoeff(), 1e-9);
  Eigen::SelfAdjointEigenSolver<StateMatrix> es(c.P);
  EXPECT_GT(es.eigenvalues().minCoeff(), -1e-9);
  EXPECT_TRUE((c.P.diagonal().array() > 0).all()) << c.P.diagonal().transpose();
}

StateVector random_state(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  NavState s;
  Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  s.q() = q.normalized();
  s.v() = 3.0 * Vec3d(n(rng), n(rng), n(rng));
  s.p() = 20.0 * Vec3d(n(rng), n(rng), n(rng));
  s.dang_bias() = 1e-4 * Vec3d(n(rng), n(rng), n(rng));
  s.dvel_bias() = 1e-3 * Vec3d(n(rng), n(rng), n(rng));
  s.mag_earth() = Vec3d(0.22, 0.01, 0.41) + 0.01 * Vec3d(n(rng), n(rng), n(rng));
  s.mag_body() = 0.01 * Vec3d(n(rng), n(rng), n(rng));
  return s.x;
}

// Chi-square CDF with 3 degrees of freedom.
double chi2_3_cdf(double x) { return std::erf(std::sqrt(x / 2)) - std::sqrt(2 * x / kPi) * std::exp(-x / 2); }

// --- initialization -----------------------------------------------------------------

TEST(InitState, LevelStaticAtOrigin) {
  const FilterConfig cfg;
  const auto [s, c] = init_state(gps_at(Vec3d::Zero()), mag_for(quat_identity<double>()),
                                 specific_force_at_rest(quat_identity<double>()), cfg);
  const auto e = euler_from_quat(s.q());
  EXPECT_NEAR(e.roll, 0.0, 1e-12);
  EXPECT_NEAR(e.pitch, 0.0, 1e-12);
  EXPECT_NEAR(e.yaw, 0.0, 1e-12);
  EXPECT_EQ(s.p(), Vec3d::Zero());
  EXPECT_EQ(s.v(), Vec3d::Zero());
  EXPECT_EQ(s.dang_bias(), Vec3d::Zero());
  EXPECT_EQ(s.dvel_bias(), Vec3d::Zero());
  EXPECT_EQ(s.wind(), Vec2d::Zero());
  EXPECT_EQ(s.mag_body(), Vec3d::Zero());
  EXPECT_TRUE(s.mag_earth().isApprox(cfg.init.earth_field));
  expect_healthy(s, c);
}

TEST(InitState, TenDegreePitch) {
  // atan2 of the gravity components in body axes.
  const Vec3d f(kGravity * std::sin(10 * kDeg), 0.0, -kGravity * std::cos(10 * kDeg));
  const Quaterniond truth = quat_from_euler(EulerAnglesd{0.0, 10 * kDeg, 0.0});
  const auto [s, c] = init_state(gps_at(Vec3d::Zero()), mag_for(truth), f, FilterConfig{});
  const auto e = euler_from_quat(s.q());
  EXPECT_NEAR(e.pitch, 10 * kDeg, 0.1 * kDeg);
  EXPECT_NEAR(e.roll, 0.0, 1e-9);
  EXPECT_NEAR(e.yaw, 0.0, 1e-9);
}

TEST(InitState, TiltCompensatedHeading) {
  const Quaterniond truth = quat_from_euler(EulerAnglesd{-4 * kDeg, 6 * kDeg, 130 * kDeg});
  const auto [s, c] =
      init_state(gps_at(Vec3d(3, -2, -1)), mag_for(truth), specific_force_at_rest(truth), FilterConfig{});
  EXPECT_LT((quat_canonical(s.q()) - quat_canonical(truth)).norm(), 1e-9);
  EXPECT_EQ(s.p(), Vec3d(3, -2, -1));
}

TEST(InitState, MovingVehicleIsRejected) {
  EXPECT_THROW(init_state(gps_at(Vec3d::Zero()), mag_for(quat_identity<double>()), Vec3d(0, 0, -5.0),
                          FilterConfig{}),
               NotStatic);
  EXPECT_THROW(init_state(gps_at(Vec3d::Zero()), mag_for(quat_identity<double>()), Vec3d(0, 0, -12.5),
                          FilterConfig{}),
               NotStatic);
}

// --- prediction -----------------------------------------------------------------------

TEST(Predict, StaticEquilibrium) {
  const FilterConfig cfg;
  auto [s, c] = init_state(gps_at(Vec3d(1, 2, -3)), mag_for(quat_identity<double>()),
                           specific_force_at_rest(quat_identity<double>()), cfg);
  const StateVector x0 = s.x;
  for (int k = 0; k < 100; ++k) {
    std::tie(s, c) = predict(s, c, imu(Vec3d::Zero(), Vec3d(0, 0, -kGravity * 0.01)), cfg);
    expect_healthy(s, c);
  }
  EXPECT_LT((s.x - x0).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Predict, ConstantAccelerationKinematics) {
  NavState s;
  StateVector x = s.x;
  // 1 m/s^2 forward: 100 increments of 0.01 m/s.
  const ImuSample u = imu(Vec3d::Zero(), Vec3d(0.01, 0, -kGravity * 0.01));
  for (int k = 0; k < 100; ++k) x = propagate_state(x, u);
  const NavState end(x);
  // v = sum of increments, p = a t^2 / 2.
  EXPECT_NEAR(end.v().x(), 1.0, 1e-12);
  EXPECT_NEAR(end.p().x(), 0.5, 0.005);
  EXPECT_NEAR(end.v().z(), 0.0, 1e-12);
}

TEST(Predict, YawAngleSummation) {
  NavState s;
  StateVector x = s.x;
  for (int k = 0; k < 157; ++k) x = propagate_state(x, imu(Vec3d(0, 0, 0.01), Vec3d(0, 0, -kGravity * 0.01)));
  EXPECT_NEAR(euler_from_quat(NavState(x).q()).yaw, kPi / 2, 1e-3);
}

TEST(Predict, BiasIsRemovedFromIncrements) {
  NavState s;
  s.dang_bias() = Vec3d(0, 0, 0.001);
  StateVector x = s.x;
  for (int k = 0; k < 100; ++k) x = propagate_state(x, imu(Vec3d(0, 0, 0.001), Vec3d(0, 0, -kGravity * 0.01)));
  EXPECT_NEAR(euler_from_quat(NavState(x).q()).yaw, 0.0, 1e-12);
}

TEST(Predict, RejectsInvalidImu) {
  const FilterConfig cfg;
  const NavState s;
  NavCovariance c;
  c.P.setIdentity();
  EXPECT_THROW(predict(s, c, imu(Vec3d::Zero(), Vec3d::Zero(), 0.0), cfg), InvalidInput);
  EXPECT_THROW(predict(s, c, imu(Vec3d::Zero(), Vec3d::Zero(), 0.2), cfg), InvalidInput);
  EXPECT_THROW(predict(s, c, imu(Vec3d(NAN, 0, 0), Vec3d::Zero()), cfg), InvalidInput);
}

TEST(Jacobians, StepSizeSelfConsistency) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 10; ++trial) {
    const StateVector x = random_state(rng);
    const ImuSample u = imu(0.01 * Vec3d(n(rng), n(rng), n(rng)), 0.1 * Vec3d(n(rng), n(rng), n(rng)));
    const StateMatrix f6 = state_transition_jacobian(x, u, 1e-6);
    const StateMatrix f5 = state_transition_jacobian(x, u, 1e-5);
    for (int i = 0; i < kStateDim; ++i) {
      for (int j = 0; j < kStateDim; ++j) {
        const double scale = std::max({std::abs(f6(i, j)), std::abs(f5(i, j)), 1e-6});
        EXPECT_LE(std::abs(f6(i, j) - f5(i, j)), 1e-3 * scale) << "F(" << i << "," << j << ")";
      }
    }
    for (const auto kind : {MeasurementKind::Mag, MeasurementKind::FlowVel}) {
      const Eigen::MatrixXd h6 = measurement_jacobian(x, kind, 1e-6);
      const Eigen::MatrixXd h5 = measurement_jacobian(x, kind, 1e-5);
      EXPECT_LE((h6 - h5).cwiseAbs().maxCoeff(), 1e-3 * std::max(h6.cwiseAbs().maxCoeff(), 1e-6));
    }
  }
}

TEST(Jacobians, LinearModelsAreExact) {
  std::mt19937_64 rng(22);
  const StateVector x = random_state(rng);
  const Eigen::MatrixXd h = measurement_jacobian(x, MeasurementKind::GpsPos);
  ASSERT_EQ(h.rows(), 3);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(3, kStateDim);
  expected.block(0, state_index::kPos, 3, 3).setIdentity();
  EXPECT_LT((h - expected).cwiseAbs().maxCoeff(), 1e-8);
  const Eigen::MatrixXd hb = measurement_jacobian(x, MeasurementKind::Baro);
  EXPECT_NEAR(hb(0, state_index::kPos + 2), -1.0, 1e-8);
}

// --- measurement models -----------------------------------------------------------------

TEST(MeasurementModel, Definitions) {
  std::mt19937_64 rng(23);
  const NavState s(random_state(rng));
  const Mat3d r = quat_to_rot(s.q());
  EXPECT_LT((predict_measurement(s.x, MeasurementKind::GpsPos) - s.p()).norm(), 1e-15);
  EXPECT_LT((predict_measurement(s.x, MeasurementKind::GpsVel) - s.v()).norm(), 1e-15);
  EXPECT_NEAR(predict_measurement(s.x, MeasurementKind::Baro)(0), -s.p().z(), 1e-15);
  EXPECT_LT((predict_measurement(s.x, MeasurementKind::Mag) - (r.transpose() * s.mag_earth() + s.mag_body())).norm(),
            1e-14);
  EXPECT_LT((predict_measurement(s.x, MeasurementKind::FlowVel) - (r.transpose() * s.v()).head<2>()).norm(), 1e-14);
}

// --- update -----------------------------------------------------------------------------------

std::pair<NavState, NavCovariance> diagonal_prior(double pos_var) {
  NavState s;
  NavCovariance c;
  c.P = 1e-4 * StateMatrix::Identity();
  c.P.block<3, 3>(state_index::kPos, state_index::kPos) = pos_var * Mat3d::Identity();
  return {s, c};
}

TEST(Update, ZeroInnovationLeavesStateAndShrinksCovariance) {
  std::mt19937_64 rng(24);
  const FilterConfig cfg;
  auto [s, c] = init_state(gps_at(Vec3d(5, 1, -10)), mag_for(quat_identity<double>()),
                           specific_force_at_rest(quat_identity<double>()), cfg);
  for (const auto kind : {MeasurementKind::GpsPos, MeasurementKind::Mag, MeasurementKind::FlowVel}) {
    const Eigen::VectorXd z = predict_measurement(s.x, kind);
    const auto r = update(s, c, make(kind, z, Eigen::VectorXd::Constant(z.size(), 0.1)), cfg);
    EXPECT_LT((r.state.x - s.x).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE(r.cov.P.trace(), c.P.trace() + 1e-15);
    EXPECT_TRUE(r.record.accepted);
    expect_healthy(r.state, r.cov);
  }
}

TEST(Update, ScalarGainOneHalf) {
  auto [s, c] = diagonal_prior(4.0);
  const FilterConfig cfg;
  const auto r = update(s, c, gps_at(Vec3d(1, 0, 0), 2.0, 2.0), cfg);
  EXPECT_TRUE(r.record.accepted);
  EXPECT_NEAR(r.state.p().x(), 0.5, 1e-9);
  EXPECT_NEAR(r.state.p().y(), 0.0, 1e-12);
  EXPECT_NEAR(r.cov.P(state_index::kPos, state_index::kPos), 2.0, 1e-9);
  EXPECT_NEAR(r.record.innovation(0), 1.0, 1e-12);
  EXPECT_NEAR(r.record.innovation_variance(0), 8.0, 1e-9);
}

TEST(Update, OutlierIsGated) {
  auto [s, c] = diagonal_prior(1e-6);
  const FilterConfig cfg;
  const auto r = update(s, c, make(MeasurementKind::Baro, Eigen::VectorXd::Constant(1, 10.0),
                                   Eigen::VectorXd::Constant(1, 1.0)), cfg);
  EXPECT_FALSE(r.record.accepted);
  EXPECT_GT(r.record.nis, chi_square_99(1));
  EXPECT_EQ(r.state.x, s.x);
  EXPECT_EQ(r.cov.P, c.P);

  FilterConfig ungated;
  ungated.innovation_gating = false;
  const auto u = update(s, c, make(MeasurementKind::Baro, Eigen::VectorXd::Constant(1, 10.0),
                                   Eigen::VectorXd::Constant(1, 1.0)), ungated);
  EXPECT_TRUE(u.record.accepted);
}

TEST(Update, ChiSquareQuantiles) {
  // 1 dof: square of the 99.5 % normal quantile; 2 dof: -2 ln 0.01; 3 dof: CDF = 0.99.
  EXPECT_NEAR(chi_square_99(1), std::pow(2.5758293035489004, 2), 1e-9);
  EXPECT_NEAR(chi_square_99(2), -2.0 * std::log(0.01), 1e-9);
  EXPECT_NEAR(chi2_3_cdf(chi_square_99(3)), 0.99, 1e-12);
  EXPECT_THROW(chi_square_99(4), InvalidParameter);
}

TEST(Update, SameInstantOrderInvariance) {
  const FilterConfig cfg;
  auto [s, c] = init_state(gps_at(Vec3d::Zero()), mag_for(quat_identity<double>()),
                           specific_force_at_rest(quat_identity<double>()), cfg);
  for (int k = 0; k < 50; ++k) {
    std::tie(s, c) = predict(s, c, imu(Vec3d(1e-4, 0, 2e-4), Vec3d(0.01, 0.005, -kGravity * 0.01)), cfg);
  }
  const Measurement gps = gps_at(Vec3d(0.8, -1.2, 0.6));
  const Measurement baro =
      make(MeasurementKind::Baro, Eigen::VectorXd::Constant(1, 0.4), Eigen::VectorXd::Constant(1, 0.8));
  const auto a1 = update(s, c, gps, cfg);
  const auto a2 = update(a1.state, a1.cov, baro, cfg);
  const auto b1 = update(s, c, baro, cfg);
  const auto b2 = update(b1.state, b1.cov, gps, cfg);
  EXPECT_LT((a2.state.p() - b2.state.p()).norm(), 1e-6);
  EXPECT_GT((a2.state.p() - s.p()).norm(), 1e-3);
}

TEST(Update, RejectsInvalidMeasurement) {
  auto [s, c] = diagonal_prior(1.0);
  EXPECT_THROW(update(s, c, gps_at(Vec3d::Zero(), 0.0, 1.0), FilterConfig{}), InvalidInput);
  EXPECT_THROW(update(s, c, make(MeasurementKind::GpsPos, Vec2d(1, 2), Vec2d(1, 1)), FilterConfig{}), InvalidInput);
  EXPECT_THROW(update(s, c, gps_at(Vec3d(NAN, 0, 0)), FilterConfig{}), InvalidInput);
}

TEST(CovarianceHealth, DetectsFaults) {
  StateMatrix p = StateMatrix::Identity();
  p(0, 1) = 1e-3;
  EXPECT_NO_THROW(check_covariance_health(p));
  EXPECT_EQ(p(0, 1), p(1, 0));
  StateMatrix neg = StateMatrix::Identity();
  neg(3, 3) = -1e-3;
  EXPECT_THROW(check_covariance_health(neg), NumericalFault);
  StateMatrix nan = StateMatrix::Identity();
  nan(2, 2) = NAN;
  EXPECT_THROW(check_covariance_health(nan), NumericalFault);
}

// --- outputs -----------------------------------------------------------------------------

TEST(OutputVector, Mapping) {
  NavState s;
  const OutputVector o = output_vector(s, 0.01);
  EXPECT_EQ(o.roll, 0.0);
  EXPECT_EQ(o.pitch, 0.0);
  EXPECT_EQ(o.yaw, 0.0);

  s.dang_bias() = Vec3d(0.001, 0, 0);
  s.q() = Quaterniond(std::sqrt(0.5), 0, 0, std::sqrt(0.5));
  s.v() = Vec3d(1, 2, 3);
  s.p() = Vec3d(4, 5, 6);
  const OutputVector p = output_vector(s, 0.01);
  EXPECT_NEAR(p.gyro_bias_x, 0.1, 1e-15);
  EXPECT_NEAR(p.yaw, kPi / 2, 1e-15);
  EXPECT_EQ(p.vel_n, 1.0);
  EXPECT_EQ(p.vel_e, 2.0);
  EXPECT_EQ(p.vel_d, 3.0);
  EXPECT_EQ(p.pos_n, 4.0);
  EXPECT_EQ(p.pos_e, 5.0);
  EXPECT_EQ(p.pos_d, 6.0);
}

TEST(Snapshot, CsvRowRoundTrips) {
  std::mt19937_64 rng(25);
  const NavState s(random_state(rng));
  NavCovariance c;
  c.P = StateMatrix::Identity() * 0.25;
  const std::string header = state_csv_header();
  const std::string row = state_csv_row(12.5, s, c);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 2 * kStateDim);
  EXPECT_EQ(header.substr(0, 5), "t,q0,");
  std::stringstream ss(row);
  std::string cell;
  std::vector<double> vals;
  while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
  ASSERT_EQ(vals.size(), static_cast<std::size_t>(1 + 2 * kStateDim));
  EXPECT_EQ(vals[0], 12.5);
  for (int i = 0; i < kStateDim; ++i) {
    EXPECT_EQ(vals[1 + i], s.x(i));
    EXPECT_EQ(vals[1 + kStateDim + i], 0.25);
  }
}

TEST(NavFilter, RunsPredictUpdateCycle) {
  NavFilter f{FilterConfig{}};
  EXPECT_FALSE(f.initialized());
  f.initialize(gps_at(Vec3d::Zero()), mag_for(quat_identity<double>()),
               specific_force_at_rest(quat_identity<double>()));
  ASSERT_TRUE(f.initialized());
  for (int k = 0; k < 20; ++k) {
    f.predict(imu(Vec3d::Zero(), Vec3d(0, 0, -kGravity * 0.01), 0.01, 0.01 * (k + 1)));
    const auto rec = f.update(gps_at(Vec3d(0.1, 0, 0)));
    EXPECT_TRUE(rec.accepted);
    expect_healthy(f.state(), f.covariance());
  }
  EXPECT_GT(f.state().p().x(), 0.0);
}

}  // namespace
}  // namespace ofnav
