#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ofnav/geom.hpp"

namespace ofnav {
namespace {

constexpr double kPi = std::numbers::pi;

Quaterniond random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q / q.norm();
}

// Left-multiplication matrix L(a) with a * b = L(a) b.
Eigen::Matrix4d left_matrix(const Quaterniond& a) {
  Eigen::Matrix4d m;
  m << a(0), -a(1), -a(2), -a(3),
       a(1), a(0), -a(3), a(2),
       a(2), a(3), a(0), -a(1),
       a(3), -a(2), a(1), a(0);
  return m;
}

Mat3d skew(const Vec3d& v) {
  Mat3d s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

TEST(QuatMul, IdentityIsNeutral) {
  std::mt19937_64 rng(1);
  const Quaterniond q = random_unit(rng);
  EXPECT_TRUE(quat_mul(quat_identity<double>(), q).isApprox(q, 1e-15));
  EXPECT_TRUE(quat_mul(q, quat_identity<double>()).isApprox(q, 1e-15));
}

TEST(QuatMul, ISquaredIsMinusOne) {
  const Quaterniond i(0, 1, 0, 0);
  EXPECT_LT((quat_mul(i, i) - Quaterniond(-1, 0, 0, 0)).norm(), 1e-15);
}

TEST(QuatMul, MatchesMatrixFormOracle) {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 100; ++k) {
    const Quaterniond a = random_unit(rng), b = random_unit(rng);
    const Quaterniond expected = left_matrix(a) * b;
    EXPECT_LT((quat_mul(a, b) - expected).norm(), 1e-14);
  }
}

TEST(QuatMul, NormIsMultiplicative) {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 50; ++k) {
    const Quaterniond a = 2.0 * random_unit(rng), b = 0.5 * random_unit(rng);
    EXPECT_NEAR(quat_mul(a, b).norm(), a.norm() * b.norm(), 1e-12);
  }
}

TEST(QuatMul, Associative) {
  std::mt19937_64 rng(9);
  for (int k = 0; k < 100; ++k) {
    const Quaterniond a = random_unit(rng), b = random_unit(rng), c = random_unit(rng);
    EXPECT_LT((quat_mul(quat_mul(a, b), c) - quat_mul(a, quat_mul(b, c))).norm(), 1e-12);
  }
}

TEST(QuatFromDeltaAngle, ZeroIsIdentity) {
  EXPECT_EQ(quat_from_delta_angle(Vec3d::Zero()), quat_identity<double>());
}

TEST(QuatFromDeltaAngle, HalfTurnAboutX) {
  EXPECT_LT((quat_from_delta_angle(Vec3d(kPi, 0, 0)) - Quaterniond(0, 1, 0, 0)).norm(), 1e-12);
}

TEST(QuatFromDeltaAngle, MatchesRodriguesOracle) {
  const Vec3d theta(0.1, 0.2, -0.05);
  const double angle = theta.norm();
  const Mat3d k = skew(theta / angle);
  const Mat3d r = Mat3d::Identity() + std::sin(angle) * k + (1 - std::cos(angle)) * k * k;
  // Shepperd-free conversion: trace is well above zero for this small rotation.
  const double w = 0.5 * std::sqrt(1 + r.trace());
  const Quaterniond expected(w, (r(2, 1) - r(1, 2)) / (4 * w), (r(0, 2) - r(2, 0)) / (4 * w),
                             (r(1, 0) - r(0, 1)) / (4 * w));
  EXPECT_LT((quat_from_delta_angle(theta) - expected).norm(), 1e-12);
  EXPECT_LT((quat_to_rot(quat_from_delta_angle(theta)) - r).norm(), 1e-12);
}

TEST(QuatFromDeltaAngle, SmallAngleSeriesIsContinuous) {
  const Vec3d dir = Vec3d(1, -2, 0.5).normalized();
  const Quaterniond below = quat_from_delta_angle(Vec3d(dir * 0.99e-8));
  const Quaterniond above = quat_from_delta_angle(Vec3d(dir * 1.01e-8));
  EXPECT_LT((below - above).norm(), 1e-9);
  EXPECT_NEAR(below.norm(), 1.0, 1e-15);
}

TEST(QuatFromDeltaAngle, NegatedAngleIsInverse) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 0.7);
  for (int k = 0; k < 100; ++k) {
    const Vec3d a(n(rng), n(rng), n(rng));
    const Quaterniond p = quat_mul(quat_from_delta_angle(a), quat_from_delta_angle(Vec3d(-a)));
    EXPECT_LT((p - quat_identity<double>()).norm(), 1e-12);
  }
}

TEST(QuatToRot, IdentityQuaternion) {
  EXPECT_TRUE(quat_to_rot(quat_identity<double>()).isApprox(Mat3d::Identity()));
}

TEST(QuatToRot, RandomQuaternionsAreOrthonormal) {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 100; ++k) {
    const Mat3d r = quat_to_rot(random_unit(rng));
    EXPECT_LT((r.transpose() * r - Mat3d::Identity()).norm(), 1e-12);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
  }
}

TEST(QuatToRot, RotatesBodyToNed) {
  // 90 deg yaw: body x (nose) points east.
  const Quaterniond q(std::sqrt(0.5), 0, 0, std::sqrt(0.5));
  EXPECT_LT((quat_to_rot(q) * Vec3d::UnitX() - Vec3d::UnitY()).norm(), 1e-15);
}

TEST(QuatToRot, ZeroQuaternionThrows) {
  EXPECT_THROW(quat_to_rot(Quaterniond::Zero().eval()), InvalidInput);
  EXPECT_THROW(euler_from_quat(Quaterniond::Zero().eval()), InvalidInput);
  EXPECT_THROW(quat_normalize(Quaterniond::Zero().eval()), InvalidInput);
}

TEST(QuatNormalize, UnitNorm) {
  const Quaterniond q = quat_normalize(Quaterniond(1, 2, 3, 4));
  EXPECT_NEAR(q.norm(), 1.0, 1e-15);
}

TEST(Euler, IdentityIsZero) {
  const auto e = euler_from_quat(quat_identity<double>());
  EXPECT_EQ(e.roll, 0.0);
  EXPECT_EQ(e.pitch, 0.0);
  EXPECT_EQ(e.yaw, 0.0);
}

TEST(Euler, PureYaw) {
  const auto e = euler_from_quat(Quaterniond(std::sqrt(0.5), 0, 0, std::sqrt(0.5)));
  EXPECT_NEAR(e.yaw, kPi / 2, 1e-15);
  EXPECT_NEAR(e.roll, 0.0, 1e-15);
  EXPECT_NEAR(e.pitch, 0.0, 1e-15);
}

TEST(Euler, RoundTripAwayFromGimbalLock) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double pitch_max = kPi / 2 - 1e-3;
  for (int k = 0; k < 500; ++k) {
    EulerAnglesd e{kPi * u(rng), pitch_max * u(rng), kPi * u(rng)};
    const auto back = euler_from_quat(quat_from_euler(e));
    EXPECT_NEAR(wrap_pi(back.roll - e.roll), 0.0, 1e-9);
    EXPECT_NEAR(back.pitch, e.pitch, 1e-9);
    EXPECT_NEAR(wrap_pi(back.yaw - e.yaw), 0.0, 1e-9);
  }
  for (const double p : {pitch_max, -pitch_max}) {
    const auto back = euler_from_quat(quat_from_euler(EulerAnglesd{0.3, p, -1.2}));
    EXPECT_NEAR(back.pitch, p, 1e-9);
    EXPECT_NEAR(back.roll, 0.3, 1e-9);
    EXPECT_NEAR(back.yaw, -1.2, 1e-9);
  }
}

TEST(Euler, MatchesZyxRotationProduct) {
  const EulerAnglesd e{0.2, -0.4, 2.5};
  const Mat3d r = (Eigen::AngleAxisd(e.yaw, Vec3d::UnitZ()) * Eigen::AngleAxisd(e.pitch, Vec3d::UnitY()) *
                   Eigen::AngleAxisd(e.roll, Vec3d::UnitX()))
                      .toRotationMatrix();
  EXPECT_LT((quat_to_rot(quat_from_euler(e)) - r).norm(), 1e-14);
}

TEST(RotToQuat, InvertsQuatToRot) {
  std::mt19937_64 rng(13);
  for (int k = 0; k < 200; ++k) {
    const Quaterniond q = quat_canonical(random_unit(rng));
    EXPECT_LT((rot_to_quat(quat_to_rot(q)) - q).norm(), 1e-12);
  }
}

TEST(RotationVector, InvertsExponentialMap) {
  const Vec3d a(0.3, -1.1, 0.7);
  EXPECT_LT((quat_to_rotation_vector(quat_from_delta_angle(a)) - a).norm(), 1e-12);
}

TEST(LlaToNed, OriginMapsToZero) {
  const GeoOrigin o{0.7, -1.3, 120.0};
  EXPECT_EQ(lla_to_ned(GeodeticPoint{o.lat, o.lon, o.alt}, o), Vec3d::Zero());
}

TEST(LlaToNed, LatitudeStepAtEquator) {
  // a (1 - e^2) * 1e-5, evaluated independently of the library.
  const Vec3d ned = lla_to_ned(GeodeticPoint{1e-5, 0, 0}, GeoOrigin{});
  EXPECT_NEAR(ned.x(), 63.3543932729282, 1e-9);
  EXPECT_EQ(ned.y(), 0.0);
  EXPECT_EQ(ned.z(), 0.0);
}

TEST(LlaToNed, AltitudeIsNegativeDown) {
  const GeoOrigin o{0.5, 0.2, 50.0};
  EXPECT_EQ(lla_to_ned(GeodeticPoint{o.lat, o.lon, 60.0}, o).z(), -10.0);
}

TEST(LlaToNed, DifferencesDoNotDependOnOriginShift) {
  // Flat-earth radii are taken at the origin latitude, so the origin is moved
  // in longitude and altitude only.
  const GeoOrigin o1{0.8, 0.1, 10.0};
  const GeoOrigin o2{0.8, 0.1 + 5e-5, -30.0};
  const GeodeticPoint p{0.8 + 1e-4, 0.1 + 6e-5, 14.0};
  const GeodeticPoint q{0.8 - 5e-5, 0.1 - 4e-5, 2.0};
  const Vec3d d1 = lla_to_ned(p, o1) - lla_to_ned(q, o1);
  const Vec3d d2 = lla_to_ned(p, o2) - lla_to_ned(q, o2);
  EXPECT_LT((d1 - d2).norm(), 1e-6);
}

TEST(LlaToNed, RoundTripsThroughNedToLla) {
  const GeoOrigin o{0.6, 2.0, 100.0};
  const Vec3d ned(1234.5, -987.6, -42.0);
  EXPECT_LT((lla_to_ned(ned_to_lla(ned, o), o) - ned).norm(), 1e-9);
}

TEST(LlaToNed, BeyondTenKilometresThrows) {
  const GeoOrigin o{};
  EXPECT_THROW(lla_to_ned(GeodeticPoint{0.002, 0, 0}, o), RangeError);
  EXPECT_NO_THROW(lla_to_ned(GeodeticPoint{0.0015, 0, 0}, o));
}

TEST(GeoOrigin, RejectsOutOfRange) {
  EXPECT_THROW((GeoOrigin{2.0, 0, 0}).validate(), InvalidInput);
  EXPECT_THROW((GeoOrigin{0, 4.0, 0}).validate(), InvalidInput);
}

}  // namespace
}  // namespace ofnav
