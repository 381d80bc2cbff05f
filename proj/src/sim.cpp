#include "ofnav/sim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>

namespace ofnav {

namespace {

constexpr double kPi = std::numbers::pi;
const Vec3d kGravityNed(0.0, 0.0, kGravity);

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double lattice_value(std::uint64_t seed, int octave, std::int64_t i, std::int64_t j) {
  std::uint64_t h = splitmix64(seed ^ (static_cast<std::uint64_t>(octave) * 0xD6E8FEB86659FD93ULL));
  h = splitmix64(h ^ static_cast<std::uint64_t>(i));
  h = splitmix64(h ^ (static_cast<std::uint64_t>(j) * 0x9E3779B97F4A7C15ULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

double value_noise(std::uint64_t seed, int octave, double u, double v) {
  const double fu = std::floor(u), fv = std::floor(v);
  const auto i = static_cast<std::int64_t>(fu);
  const auto j = static_cast<std::int64_t>(fv);
  const double su = fade(u - fu), sv = fade(v - fv);
  const double v00 = lattice_value(seed, octave, i, j);
  const double v10 = lattice_value(seed, octave, i + 1, j);
  const double v01 = lattice_value(seed, octave, i, j + 1);
  const double v11 = lattice_value(seed, octave, i + 1, j + 1);
  return (1 - sv) * ((1 - su) * v00 + su * v10) + sv * ((1 - su) * v01 + su * v11);
}

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

double smoothstep_derivative(double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  return 6.0 * x * (1.0 - x);
}

using VelocityFn = std::function<Vec3d(double)>;
using YawFn = std::function<double(double)>;

// Body -> NED attitude whose body z axis opposes the specific force, with the
// body x axis as close as possible to the requested heading.
Quaterniond attitude_from_thrust(const Vec3d& specific_force_ned, double yaw) {
  const Vec3d zb = -specific_force_ned.normalized();
  const Vec3d heading(std::cos(yaw), std::sin(yaw), 0.0);
  const Vec3d yb = zb.cross(heading).normalized();
  const Vec3d xb = yb.cross(zb);
  Mat3d r;
  r.col(0) = xb;
  r.col(1) = yb;
  r.col(2) = zb;
  return rot_to_quat(r);
}

// Integrates an analytic velocity profile on a uniform grid with per-interval
// constant acceleration, then derives attitude, body rates and specific force.
TruthTrajectory build_truth(double duration, double rate_hz, const Vec3d& start, const VelocityFn& velocity,
                            const YawFn& yaw, double tilt_window) {
  if (!(duration > 0.0)) throw InvalidParameter("trajectory duration must be positive");
  if (!(rate_hz > 0.0)) throw InvalidParameter("trajectory rate must be positive");
  TruthTrajectory traj;
  traj.dt = 1.0 / rate_hz;
  const auto n = static_cast<std::size_t>(std::ceil(duration * rate_hz - 1e-9)) + 1;
  traj.samples.resize(std::max<std::size_t>(n, 2));
  const double dt = traj.dt;

  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    auto& s = traj.samples[k];
    s.t = static_cast<double>(k) * dt;
    s.velocity = velocity(s.t);
  }
  traj.samples[0].position = start;
  for (std::size_t k = 1; k < traj.samples.size(); ++k) {
    const auto& a = traj.samples[k - 1];
    traj.samples[k].position = a.position + 0.5 * (a.velocity + traj.samples[k].velocity) * dt;
  }

  Quaterniond prev = quat_identity<double>();
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    auto& s = traj.samples[k];
    const double h = 0.5 * tilt_window;
    const Vec3d accel = (velocity(s.t + h) - velocity(s.t - h)) / tilt_window;
    Quaterniond q = attitude_from_thrust(accel - kGravityNed, yaw(s.t));
    if (k > 0 && q.dot(prev) < 0) q = -q;
    s.attitude = q;
    prev = q;
  }

  for (std::size_t k = 0; k + 1 < traj.samples.size(); ++k) {
    auto& s = traj.samples[k];
    const auto& next = traj.samples[k + 1];
    const Vec3d dtheta = quat_to_rotation_vector(quat_mul(quat_conjugate(s.attitude), next.attitude));
    const Quaterniond q_mid = quat_mul(s.attitude, quat_from_delta_angle(Vec3d(0.5 * dtheta)));
    s.angular_rate = dtheta / dt;
    s.specific_force = quat_to_rot(q_mid).transpose() * ((next.velocity - s.velocity) / dt - kGravityNed);
  }
  auto& last = traj.samples.back();
  last.angular_rate = traj.samples[traj.samples.size() - 2].angular_rate;
  last.specific_force = traj.samples[traj.samples.size() - 2].specific_force;
  return traj;
}

// Speed along a trapezoidal (or triangular) profile at local time tau.
struct SpeedProfile {
  double distance{0}, vmax{0}, accel{0};
  double t_acc{0}, t_total{0}, v_peak{0};

  SpeedProfile(double d, double v, double a) : distance(d), vmax(v), accel(a) {
    if (d * a >= v * v) {
      v_peak = v;
      t_acc = v / a;
      t_total = d / v + v / a;
    } else {
      v_peak = std::sqrt(d * a);
      t_acc = v_peak / a;
      t_total = 2.0 * t_acc;
    }
  }

  [[nodiscard]] double speed(double tau) const {
    if (tau <= 0.0 || tau >= t_total) return 0.0;
    if (tau < t_acc) return accel * tau;
    if (tau > t_total - t_acc) return accel * (t_total - tau);
    return v_peak;
  }
};

struct Phase {
  enum class Kind { Hold, Segment, Turn } kind{Kind::Hold};
  double t0{0}, duration{0};
  Vec3d direction{Vec3d::Zero()};
  SpeedProfile profile{0.0, 1.0, 1.0};
  double yaw0{0}, yaw_delta{0};
};

}  // namespace

// --- RNG -------------------------------------------------------------------------

RngStream::RngStream(std::uint64_t seed, std::string_view name) {
  const std::uint64_t h = fnv1a(name);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  engine_.seed(seq);
}

double RngStream::normal() { return normal_(engine_); }
double RngStream::uniform() { return uniform_(engine_); }

// --- texture ----------------------------------------------------------------------

double GroundTexture::operator()(double north, double east, double footprint) const {
  double sum = 0.0, amp_sum = 0.0, amp = 1.0, lambda = base_wavelength;
  for (int k = 0; k < octaves; ++k) {
    const double w = footprint > 0.0 ? std::clamp((lambda / footprint - 2.0) / 2.0, 0.0, 1.0) : 1.0;
    const double n = w > 0.0 ? value_noise(seed, k, north / lambda, east / lambda) : 0.5;
    sum += amp * (w * n + (1.0 - w) * 0.5);
    amp_sum += amp;
    amp *= persistence;
    lambda *= 0.5;
  }
  return std::clamp(0.5 + contrast * (sum / amp_sum - 0.5), 0.0, 1.0);
}

// --- truth ------------------------------------------------------------------------

std::size_t TruthTrajectory::index_at(double t) const {
  if (samples.empty()) throw RangeError("truth trajectory is empty");
  const double k = std::round((t - start_time()) / dt);
  if (k < 0 || k > static_cast<double>(samples.size() - 1) || std::abs(t - (start_time() + k * dt)) > 0.5 * dt) {
    throw RangeError("time " + std::to_string(t) + " outside the truth trajectory");
  }
  return static_cast<std::size_t>(k);
}

TruthTrajectory hover_trajectory(double duration, const Vec3d& hold_position, const HoverConfig& config) {
  if (!(duration > 0.0)) throw InvalidParameter("hover_trajectory: duration must be positive");

  // Dither: a handful of random sinusoids per axis, switched on smoothly after
  // the settle period. Each axis has variance sum(a^2)/2 = dither_std^2.
  constexpr int kTones = 6;
  struct Tone {
    double amp, omega, phase;
  };
  std::array<std::array<Tone, kTones>, 3> tones{};
  RngStream rng(config.seed, "hover_dither");
  const double f_lo = std::min(0.05, 0.5 * config.dither_bandwidth);
  for (int axis = 0; axis < 3; ++axis) {
    const double std_axis = axis < 2 ? config.dither_std : config.dither_vertical_std;
    for (auto& tone : tones[static_cast<std::size_t>(axis)]) {
      tone.amp = std_axis * std::sqrt(2.0 / kTones);
      tone.omega = 2.0 * kPi * (f_lo + (config.dither_bandwidth - f_lo) * rng.uniform());
      tone.phase = 2.0 * kPi * rng.uniform();
    }
  }
  constexpr double kRamp = 3.0;
  const double settle = config.settle_time;

  auto velocity = [=](double t) {
    const double x = (t - settle) / kRamp;
    const double env = smoothstep(x), denv = smoothstep_derivative(x) / kRamp;
    Vec3d v = Vec3d::Zero();
    if (env == 0.0 && denv == 0.0) return v;
    for (int axis = 0; axis < 3; ++axis) {
      double s = 0.0, ds = 0.0;
      for (const auto& tone : tones[static_cast<std::size_t>(axis)]) {
        s += tone.amp * std::sin(tone.omega * t + tone.phase);
        ds += tone.amp * tone.omega * std::cos(tone.omega * t + tone.phase);
      }
      v(axis) = denv * s + env * ds;
    }
    return v;
  };
  return build_truth(duration, config.rate_hz, hold_position, velocity, [](double) { return 0.0; }, 0.5);
}

double trapezoid_duration(double distance, double cruise_speed, double accel_limit) {
  return SpeedProfile(distance, cruise_speed, accel_limit).t_total;
}

TruthTrajectory waypoint_trajectory(const std::vector<Vec3d>& waypoints, double cruise_speed,
                                    const MissionConfig& config) {
  if (waypoints.size() < 2) throw InvalidInput("waypoint_trajectory: need at least two waypoints");
  if (!(cruise_speed > 0.0)) throw InvalidParameter("waypoint_trajectory: cruise speed must be positive");

  std::vector<Phase> phases;
  double t = 0.0;
  auto push = [&](Phase p) {
    p.t0 = t;
    t += p.duration;
    phases.push_back(p);
  };

  // Initial heading: first horizontal leg, so the vehicle does not turn on the pad.
  double yaw = 0.0;
  for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
    const Vec3d d = waypoints[i + 1] - waypoints[i];
    if (d.head<2>().norm() > 1e-6) {
      yaw = std::atan2(d.y(), d.x());
      break;
    }
  }
  const double yaw_start = yaw;

  Phase hold;
  hold.duration = config.settle_time;
  hold.yaw0 = yaw;
  push(hold);

  for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
    const Vec3d d = waypoints[i + 1] - waypoints[i];
    if (d.norm() < 1e-6) throw InvalidInput("waypoint_trajectory: duplicate consecutive waypoints");
    const bool horizontal = d.head<2>().norm() > 1e-6;
    if (horizontal) {
      const double heading = std::atan2(d.y(), d.x());
      double delta = wrap_pi(heading - yaw);
      if (std::abs(std::abs(delta) - kPi) < 1e-9) delta = kPi;
      if (std::abs(delta) > 1e-6) {
        Phase turn;
        turn.kind = Phase::Kind::Turn;
        turn.yaw0 = yaw;
        turn.yaw_delta = delta;
        turn.duration = std::abs(delta) * kPi / (2.0 * config.yaw_rate);
        push(turn);
        yaw = heading;
      }
    }
    Phase seg;
    seg.kind = Phase::Kind::Segment;
    seg.direction = d.normalized();
    seg.profile = SpeedProfile(d.norm(), horizontal ? cruise_speed : config.vertical_speed, config.accel_limit);
    seg.duration = seg.profile.t_total;
    seg.yaw0 = yaw;
    push(seg);
  }
  Phase tail;
  tail.duration = 2.0;
  tail.yaw0 = yaw;
  push(tail);

  const auto find = [phases](double time) -> const Phase* {
    if (time < 0.0) return nullptr;
    for (const auto& p : phases) {
      if (time < p.t0 + p.duration) return &p;
    }
    return nullptr;
  };
  auto velocity = [find](double time) -> Vec3d {
    const Phase* p = find(time);
    if (p == nullptr || p->kind != Phase::Kind::Segment) return Vec3d::Zero();
    return p->direction * p->profile.speed(time - p->t0);
  };
  const double yaw_end = yaw;
  auto yaw_fn = [find, yaw_start, yaw_end](double time) {
    const Phase* p = find(time);
    if (p == nullptr) return time < 0.0 ? yaw_start : yaw_end;
    if (p->kind != Phase::Kind::Turn) return p->yaw0;
    const double x = (time - p->t0) / p->duration;
    return wrap_pi(p->yaw0 + p->yaw_delta * 0.5 * (1.0 - std::cos(kPi * x)));
  };
  return build_truth(t, config.rate_hz, waypoints.front(), velocity, yaw_fn, config.tilt_smoothing);
}

std::vector<Vec3d> default_mission_waypoints(double start_altitude, double cruise_altitude, double leg_length) {
  return {Vec3d(0, 0, -start_altitude),          Vec3d(0, 0, -cruise_altitude),
          Vec3d(leg_length, 0, -cruise_altitude), Vec3d(2 * leg_length, 0, -cruise_altitude),
          Vec3d(0, 0, -cruise_altitude),          Vec3d(0, 0, -start_altitude)};
}

// --- sensors ----------------------------------------------------------------------

void SensorNoiseConfig::validate() const {
  const double stds[] = {gyro_noise_density, accel_noise_density, gps_horizontal_std, gps_vertical_std,
                         gps_white_std,      gps_velocity_std,    baro_std,           mag_std};
  for (const double s : stds) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw InvalidParameter("SensorNoiseConfig: noise std must be >= 0");
  }
  const double rates[] = {imu_rate_hz, gps_rate_hz, baro_rate_hz, mag_rate_hz, camera_rate_hz};
  for (const double r : rates) {
    if (!(r > 0.0) || !std::isfinite(r)) throw InvalidParameter("SensorNoiseConfig: rates must be positive");
  }
  if (!(gps_correlation_time > 0.0)) throw InvalidParameter("SensorNoiseConfig: correlation time must be positive");
  if (!gyro_bias.allFinite() || !accel_bias.allFinite()) throw InvalidParameter("SensorNoiseConfig: non-finite bias");
}

ImuSample sample_imu(const TruthTrajectory& truth, std::size_t k, const SensorNoiseConfig& noise, RngStream& rng) {
  if (k + 1 >= truth.samples.size()) throw RangeError("sample_imu: index outside the truth trajectory");
  const auto& a = truth.samples[k];
  const auto& b = truth.samples[k + 1];
  const double dt = b.t - a.t;

  // Ideal increments are the ones the strapdown mechanization integrates exactly.
  const Vec3d dtheta = quat_to_rotation_vector(quat_mul(quat_conjugate(a.attitude), b.attitude));
  const Quaterniond q_mid = quat_mul(a.attitude, quat_from_delta_angle(Vec3d(0.5 * dtheta)));
  const Vec3d dvel = quat_to_rot(q_mid).transpose() * (b.velocity - a.velocity - kGravityNed * dt);

  ImuSample s;
  s.timestamp = b.t;
  s.dt = dt;
  const double sg = noise.gyro_noise_density * std::sqrt(dt);
  const double sa = noise.accel_noise_density * std::sqrt(dt);
  Vec3d ng, na;
  for (int i = 0; i < 3; ++i) ng(i) = rng.normal();
  for (int i = 0; i < 3; ++i) na(i) = rng.normal();
  s.delta_angle = dtheta + noise.gyro_bias * dt + sg * ng;
  s.delta_velocity = dvel + noise.accel_bias * dt + sa * na;
  return s;
}

Vec3d gps_axis_std(const SensorNoiseConfig& noise) {
  const double h = noise.gps_horizontal_std / std::sqrt(2.0);
  return {h, h, noise.gps_vertical_std};
}

GpsErrorModel::GpsErrorModel(const SensorNoiseConfig& noise, RngStream& rng) : noise_(&noise), rng_(&rng) {
  const Vec3d sigma = gps_axis_std(noise);
  error_ = Vec3d(sigma(0) * rng.normal(), sigma(1) * rng.normal(), sigma(2) * rng.normal());
}

Vec3d GpsErrorModel::step(double dt) {
  const double phi = std::exp(-dt / noise_->gps_correlation_time);
  const double drive = std::sqrt(1.0 - phi * phi);
  const Vec3d sigma = gps_axis_std(*noise_);
  for (int i = 0; i < 3; ++i) error_(i) = phi * error_(i) + drive * sigma(i) * rng_->normal();
  return error_;
}

GpsFix sample_gps(const TruthTrajectory& truth, double t, const Vec3d& correlated_error,
                  const SensorNoiseConfig& noise, const GeoOrigin& origin, RngStream& rng) {
  const auto& s = truth.samples[truth.index_at(t)];
  Vec3d white, vel_noise;
  for (int i = 0; i < 3; ++i) white(i) = rng.normal();
  for (int i = 0; i < 3; ++i) vel_noise(i) = rng.normal();
  GpsFix fix;
  fix.timestamp = s.t;
  fix.position = ned_to_lla(Vec3d(s.position + correlated_error + noise.gps_white_std * white), origin);
  fix.velocity = s.velocity + noise.gps_velocity_std * vel_noise;
  return fix;
}

BaroSample sample_baro(const TruthTrajectory& truth, double t, const SensorNoiseConfig& noise, RngStream& rng) {
  const auto& s = truth.samples[truth.index_at(t)];
  return BaroSample{s.t, -s.position.z() + noise.baro_std * rng.normal()};
}

MagSample sample_mag(const TruthTrajectory& truth, double t, const Vec3d& earth_field,
                     const SensorNoiseConfig& noise, RngStream& rng) {
  const auto& s = truth.samples[truth.index_at(t)];
  Vec3d n;
  for (int i = 0; i < 3; ++i) n(i) = rng.normal();
  return MagSample{s.t, quat_to_rot(s.attitude).transpose() * earth_field + noise.mag_std * n};
}

// --- camera -----------------------------------------------------------------------

RenderResult render_ground_image(const TruthSample& pose, const GroundTexture& texture, const CameraIntrinsics& intr) {
  intr.validate();
  const double altitude = -pose.position.z();
  if (!(altitude > 0.5)) throw InvalidInput("render_ground_image: camera must be more than 0.5 m above ground");

  const Mat3d r = quat_to_rot(pose.attitude);
  RenderResult out;
  out.frame.timestamp = pose.t;
  out.frame.pixels.resize(intr.height, intr.width);
  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      const Vec3d ray_body((u - intr.cx) / intr.focal_px, (v - intr.cy) / intr.focal_px, 1.0);
      const Vec3d ray = r * ray_body;
      if (ray.z() < 1e-6) {
        out.frame.pixels(v, u) = 0.5;
        out.degraded = true;
        continue;
      }
      const double range = altitude / ray.z();
      const Vec3d ground = pose.position + range * ray;
      out.frame.pixels(v, u) = texture(ground.x(), ground.y(), range / intr.focal_px);
    }
  }
  return out;
}

}  // namespace ofnav
