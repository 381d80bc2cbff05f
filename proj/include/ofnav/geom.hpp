#pragma once

// Rotation and frame mathematics shared by every module.
//
// Conventions (fixed repo-wide):
//   * quaternions are scalar-first (q0, q1, q2, q3) and rotate body -> NED;
//   * Euler angles use the Z-Y-X (yaw, pitch, roll) sequence;
//   * the local tangent frame is North-East-Down, anchored at a GeoOrigin.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ofnav/errors.hpp"

namespace ofnav {

template <typename Scalar>
using Quaternion = Eigen::Matrix<Scalar, 4, 1>;
template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

using Quaterniond = Quaternion<double>;
using Vec2d = Vec2<double>;
using Vec3d = Vec3<double>;
using Mat3d = Mat3<double>;

template <typename Scalar>
struct EulerAngles {
  Scalar roll{0};
  Scalar pitch{0};
  Scalar yaw{0};
};
using EulerAnglesd = EulerAngles<double>;

template <typename Scalar>
Quaternion<Scalar> quat_identity() {
  return Quaternion<Scalar>(1, 0, 0, 0);
}

/// Hamilton product a * b.
template <typename DerivedA, typename DerivedB>
Quaternion<typename DerivedA::Scalar> quat_mul(const Eigen::MatrixBase<DerivedA>& a,
                                               const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  return Quaternion<Scalar>(a(0) * b(0) - a(1) * b(1) - a(2) * b(2) - a(3) * b(3),
                            a(0) * b(1) + a(1) * b(0) + a(2) * b(3) - a(3) * b(2),
                            a(0) * b(2) - a(1) * b(3) + a(2) * b(0) + a(3) * b(1),
                            a(0) * b(3) + a(1) * b(2) - a(2) * b(1) + a(3) * b(0));
}

template <typename Derived>
Quaternion<typename Derived::Scalar> quat_conjugate(const Eigen::MatrixBase<Derived>& q) {
  return Quaternion<typename Derived::Scalar>(q(0), -q(1), -q(2), -q(3));
}

template <typename Derived>
Quaternion<typename Derived::Scalar> quat_normalize(const Eigen::MatrixBase<Derived>& q) {
  const auto n = q.norm();
  if (!(n > 0) || !std::isfinite(n)) {
    throw InvalidInput("quat_normalize: zero or non-finite quaternion");
  }
  return q / n;
}

/// Sign-canonical form (q0 >= 0) used when comparing rotations.
template <typename Derived>
Quaternion<typename Derived::Scalar> quat_canonical(const Eigen::MatrixBase<Derived>& q) {
  return q(0) < 0 ? Quaternion<typename Derived::Scalar>(-q) : Quaternion<typename Derived::Scalar>(q);
}

/// Exponential map of a rotation vector (rad).
template <typename Derived>
Quaternion<typename Derived::Scalar> quat_from_delta_angle(const Eigen::MatrixBase<Derived>& dtheta) {
  using Scalar = typename Derived::Scalar;
  const Scalar angle = dtheta.norm();
  if (angle < Scalar(1e-8)) {
    // second-order series of cos(a/2) and sin(a/2)/a
    const Scalar a2 = angle * angle;
    const Scalar s = Scalar(0.5) - a2 / Scalar(48);
    return Quaternion<Scalar>(Scalar(1) - a2 / Scalar(8), s * dtheta(0), s * dtheta(1), s * dtheta(2));
  }
  const Scalar s = std::sin(angle / 2) / angle;
  return Quaternion<Scalar>(std::cos(angle / 2), s * dtheta(0), s * dtheta(1), s * dtheta(2));
}

/// Logarithm map: the rotation vector of a unit quaternion, with angle in [0, pi].
template <typename Derived>
Vec3<typename Derived::Scalar> quat_to_rotation_vector(const Eigen::MatrixBase<Derived>& q_in) {
  using Scalar = typename Derived::Scalar;
  const Quaternion<Scalar> q = quat_canonical(q_in);
  const Vec3<Scalar> v = q.template tail<3>();
  const Scalar s = v.norm();
  if (s < Scalar(1e-12)) {
    return Scalar(2) * v / q(0);
  }
  const Scalar angle = Scalar(2) * std::atan2(s, q(0));
  return v * (angle / s);
}

/// Body -> NED direction cosine matrix.
template <typename Derived>
Mat3<typename Derived::Scalar> quat_to_rot(const Eigen::MatrixBase<Derived>& q_in) {
  using Scalar = typename Derived::Scalar;
  if (!(q_in.squaredNorm() > 0)) {
    throw InvalidInput("quat_to_rot: zero quaternion");
  }
  const Quaternion<Scalar> q = q_in / q_in.norm();
  const Scalar q0 = q(0), q1 = q(1), q2 = q(2), q3 = q(3);
  Mat3<Scalar> r;
  r << 1 - 2 * (q2 * q2 + q3 * q3), 2 * (q1 * q2 - q0 * q3), 2 * (q1 * q3 + q0 * q2),
      2 * (q1 * q2 + q0 * q3), 1 - 2 * (q1 * q1 + q3 * q3), 2 * (q2 * q3 - q0 * q1),
      2 * (q1 * q3 - q0 * q2), 2 * (q2 * q3 + q0 * q1), 1 - 2 * (q1 * q1 + q2 * q2);
  return r;
}

template <typename Derived>
EulerAngles<typename Derived::Scalar> euler_from_quat(const Eigen::MatrixBase<Derived>& q_in) {
  using Scalar = typename Derived::Scalar;
  if (!(q_in.squaredNorm() > 0)) {
    throw InvalidInput("euler_from_quat: zero quaternion");
  }
  const Quaternion<Scalar> q = q_in / q_in.norm();
  const Scalar q0 = q(0), q1 = q(1), q2 = q(2), q3 = q(3);
  EulerAngles<Scalar> e;
  e.roll = std::atan2(2 * (q0 * q1 + q2 * q3), 1 - 2 * (q1 * q1 + q2 * q2));
  e.pitch = std::asin(std::clamp<Scalar>(2 * (q0 * q2 - q3 * q1), -1, 1));
  e.yaw = std::atan2(2 * (q0 * q3 + q1 * q2), 1 - 2 * (q2 * q2 + q3 * q3));
  return e;
}

template <typename Scalar>
Quaternion<Scalar> quat_from_euler(const EulerAngles<Scalar>& e) {
  const Scalar cr = std::cos(e.roll / 2), sr = std::sin(e.roll / 2);
  const Scalar cp = std::cos(e.pitch / 2), sp = std::sin(e.pitch / 2);
  const Scalar cy = std::cos(e.yaw / 2), sy = std::sin(e.yaw / 2);
  return Quaternion<Scalar>(cr * cp * cy + sr * sp * sy, sr * cp * cy - cr * sp * sy,
                            cr * sp * cy + sr * cp * sy, cr * cp * sy - sr * sp * cy);
}

/// Rotation matrix (body -> NED) to a sign-canonical unit quaternion.
template <typename Derived>
Quaternion<typename Derived::Scalar> rot_to_quat(const Eigen::MatrixBase<Derived>& r) {
  using Scalar = typename Derived::Scalar;
  const Scalar tr = r(0, 0) + r(1, 1) + r(2, 2);
  Quaternion<Scalar> q;
  if (tr > 0) {
    const Scalar s = std::sqrt(tr + 1) * 2;
    q << s / 4, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    const Scalar s = std::sqrt(1 + r(0, 0) - r(1, 1) - r(2, 2)) * 2;
    q << (r(2, 1) - r(1, 2)) / s, s / 4, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) > r(2, 2)) {
    const Scalar s = std::sqrt(1 + r(1, 1) - r(0, 0) - r(2, 2)) * 2;
    q << (r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, s / 4, (r(1, 2) + r(2, 1)) / s;
  } else {
    const Scalar s = std::sqrt(1 + r(2, 2) - r(0, 0) - r(1, 1)) * 2;
    q << (r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, s / 4;
  }
  return quat_canonical(quat_normalize(q));
}

template <typename Scalar>
Scalar wrap_pi(Scalar a) {
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  a = std::fmod(a + pi, 2 * pi);
  if (a < 0) a += 2 * pi;
  return a - pi;
}

// --- local tangent plane -----------------------------------------------------

struct GeoOrigin {
  double lat{0};  // rad
  double lon{0};  // rad
  double alt{0};  // m, WGS-84 ellipsoidal

  void validate() const {
    if (!(std::abs(lat) <= std::numbers::pi / 2) || !(std::abs(lon) <= std::numbers::pi)) {
      throw InvalidInput("GeoOrigin: latitude/longitude out of range");
    }
  }
};

struct GeodeticPoint {
  double lat{0};
  double lon{0};
  double alt{0};
};

namespace wgs84 {
inline constexpr double kSemiMajor = 6378137.0;
inline constexpr double kFlattening = 1.0 / 298.257223563;
inline constexpr double kEccSq = kFlattening * (2.0 - kFlattening);

inline double meridian_radius(double lat) {
  const double s = std::sin(lat);
  const double d = 1.0 - kEccSq * s * s;
  return kSemiMajor * (1.0 - kEccSq) / (d * std::sqrt(d));
}

inline double normal_radius(double lat) {
  const double s = std::sin(lat);
  return kSemiMajor / std::sqrt(1.0 - kEccSq * s * s);
}
}  // namespace wgs84

inline constexpr double kFlatEarthLimit = 10'000.0;  // m

/// Flat-earth projection of a geodetic point onto the origin's NED plane.
inline Vec3d lla_to_ned(const GeodeticPoint& p, const GeoOrigin& origin) {
  const double n = (p.lat - origin.lat) * wgs84::meridian_radius(origin.lat);
  double dlon = p.lon - origin.lon;
  if (std::abs(dlon) > std::numbers::pi) dlon = wrap_pi(dlon);
  const double e = dlon * wgs84::normal_radius(origin.lat) * std::cos(origin.lat);
  if (std::hypot(n, e) > kFlatEarthLimit) {
    throw RangeError("lla_to_ned: point is more than 10 km from the origin");
  }
  return Vec3d(n, e, -(p.alt - origin.alt));
}

inline GeodeticPoint ned_to_lla(const Vec3d& ned, const GeoOrigin& origin) {
  if (std::hypot(ned.x(), ned.y()) > kFlatEarthLimit) {
    throw RangeError("ned_to_lla: point is more than 10 km from the origin");
  }
  GeodeticPoint p;
  p.lat = origin.lat + ned.x() / wgs84::meridian_radius(origin.lat);
  p.lon = origin.lon + ned.y() / (wgs84::normal_radius(origin.lat) * std::cos(origin.lat));
  p.alt = origin.alt - ned.z();
  return p;
}

}  // namespace ofnav
