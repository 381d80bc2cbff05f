#include "ofnav/fusion.hpp"

#include <cstdio>
#include <fstream>
#include <queue>
#include <tuple>

#include "ofnav/errors.hpp"

namespace ofnav {

std::vector<SensorSample> merge_streams(const std::vector<NamedStream>& streams) {
  for (const auto& s : streams) {
    for (std::size_t i = 1; i < s.samples.size(); ++i) {
      if (timestamp_of(s.samples[i]) < timestamp_of(s.samples[i - 1])) {
        throw InvalidInput("merge_streams: stream '" + s.name + "' is not time-ordered at sample " +
                           std::to_string(i));
      }
    }
  }

  // (time, kind priority, stream, position); the last two keep the merge stable.
  using Key = std::tuple<double, std::size_t, std::size_t, std::size_t>;
  std::priority_queue<Key, std::vector<Key>, std::greater<>> heap;
  std::size_t total = 0;
  for (std::size_t k = 0; k < streams.size(); ++k) {
    total += streams[k].samples.size();
    if (!streams[k].samples.empty()) {
      const auto& first = streams[k].samples.front();
      heap.emplace(timestamp_of(first), first.index(), k, 0);
    }
  }

  std::vector<SensorSample> out;
  out.reserve(total);
  while (!heap.empty()) {
    const auto [t, prio, k, i] = heap.top();
    heap.pop();
    out.push_back(streams[k].samples[i]);
    if (i + 1 < streams[k].samples.size()) {
      const auto& next = streams[k].samples[i + 1];
      heap.emplace(timestamp_of(next), next.index(), k, i + 1);
    }
  }
  return out;
}

Measurement gps_position_measurement(const GpsFix& fix, const GeoOrigin& origin, const MeasurementNoise& noise) {
  Measurement m;
  m.kind = MeasurementKind::GpsPos;
  m.timestamp = fix.timestamp;
  m.value = lla_to_ned(fix.position, origin);
  m.noise_std = Eigen::Vector3d(noise.gps_pos_horizontal, noise.gps_pos_horizontal, noise.gps_pos_vertical);
  return m;
}

Measurement gps_velocity_measurement(const GpsFix& fix, const MeasurementNoise& noise) {
  Measurement m;
  m.kind = MeasurementKind::GpsVel;
  m.timestamp = fix.timestamp;
  m.value = fix.velocity;
  m.noise_std = Eigen::Vector3d::Constant(noise.gps_vel);
  return m;
}

namespace {

Measurement mag_measurement(const MagSample& s, const MeasurementNoise& noise) {
  Measurement m;
  m.kind = MeasurementKind::Mag;
  m.timestamp = s.timestamp;
  m.value = s.field;
  m.noise_std = Eigen::Vector3d::Constant(noise.mag);
  return m;
}

Measurement baro_measurement(const BaroSample& s, const MeasurementNoise& noise) {
  Measurement m;
  m.kind = MeasurementKind::Baro;
  m.timestamp = s.timestamp;
  m.value = Eigen::VectorXd::Constant(1, s.altitude);
  m.noise_std = Eigen::VectorXd::Constant(1, noise.baro);
  return m;
}

class FusionRun {
 public:
  explicit FusionRun(const FusionConfig& config) : cfg_(config), filter_(config.filter) {
    cfg_.flow.validate();
    cfg_.camera.validate();
    cfg_.origin.validate();
  }

  NavLog run(const std::vector<SensorSample>& timeline) {
    for (const auto& ev : timeline) {
      const double t = timestamp_of(ev);
      try {
        if (!filter_.initialized()) {
          std::visit([this](const auto& s) { on_init_sample(s); }, ev);
        } else {
          std::visit([this](const auto& s) { on_sample(s); }, ev);
        }
      } catch (const NumericalFault& e) {
        log_.fault = FaultRecord{t, e.what()};
        break;
      }
    }
    if (!filter_.initialized()) {
      throw InvalidInput("run_fusion: timeline ended before the filter could initialize");
    }
    close_epoch();
    return std::move(log_);
  }

 private:
  // --- initialization ---
  void on_init_sample(const ImuSample& s) {
    if (!init_start_) init_start_ = s.timestamp - s.dt;
    if (s.timestamp <= *init_start_ + cfg_.init_window + 1e-9) {
      accel_sum_ += s.delta_velocity;
      accel_time_ += s.dt;
    }
    accumulate_gyro(s);
  }
  void on_init_sample(const BaroSample&) {}
  void on_init_sample(const MagSample& s) { last_mag_ = s; }
  void on_init_sample(const GpsFix& s) {
    if (!init_start_ || !last_mag_ || accel_time_ <= 0.0) return;
    if (s.timestamp < *init_start_ + cfg_.init_window - 1e-9) return;
    const MeasurementNoise& mn = cfg_.filter.measurement;
    if (cfg_.home_from_first_fix) home_.head<2>() = lla_to_ned(s.position, cfg_.origin).head<2>();
    std::optional<Measurement> vel;
    if (cfg_.fuse_gps_velocity) vel = gps_velocity_measurement(s, mn);
    filter_.initialize(gps_measurement(s), mag_measurement(*last_mag_, mn), accel_sum_ / accel_time_, vel);
  }
  void on_init_sample(const CameraSample& s) { on_camera(s, false); }

  // --- running ---
  void on_sample(const ImuSample& s) {
    close_epoch();
    filter_.predict(s);
    epoch_t_ = s.timestamp;
    accumulate_gyro(s);
    body_vel_sum_ += body_velocity() * s.dt;
    body_vel_time_ += s.dt;
  }
  void on_sample(const BaroSample& s) { apply(baro_measurement(s, cfg_.filter.measurement)); }
  void on_sample(const MagSample& s) { apply(mag_measurement(s, cfg_.filter.measurement)); }
  void on_sample(const GpsFix& s) {
    apply(gps_measurement(s));
    if (cfg_.fuse_gps_velocity) apply(gps_velocity_measurement(s, cfg_.filter.measurement));
  }
  void on_sample(const CameraSample& s) { on_camera(s, true); }

  void on_camera(const CameraSample& s, bool fuse) {
    if (!cfg_.use_flow || !s.frame) return;
    if (fuse && prev_frame_ && gyro_time_ > 0.0 && s.timestamp > prev_frame_->timestamp) {
      const FlowField field = farneback_flow(*prev_frame_, *s.frame, cfg_.flow);
      ++log_.flow_computations;
      if (field.texture_strength < cfg_.min_texture_strength) {
        ++log_.flow_low_texture;
      } else {
        const Vec3d gyro = gyro_sum_ / gyro_time_;
        const double h_agl = -filter_.state().p().z();
        const Vec2d rate = derotated_flow_rate(field, gyro, cfg_.camera, cfg_.flow_border_margin);
        if (const auto v = flow_to_body_velocity(rate, gyro, h_agl, cfg_.camera)) {
          Measurement m;
          m.kind = MeasurementKind::FlowVel;
          m.timestamp = s.timestamp;
          // Flow averages over the frame interval; shift it to the current epoch.
          m.value = *v;
          if (body_vel_time_ > 0.0) m.value += body_velocity() - body_vel_sum_ / body_vel_time_;
          m.noise_std = Eigen::Vector2d::Constant(cfg_.filter.measurement.flow_vel);
          m.h_agl = h_agl;
          if (apply(m)) ++log_.flow_updates;
        }
      }
    }
    prev_frame_ = s.frame;
    gyro_sum_.setZero();
    body_vel_sum_.setZero();
    body_vel_time_ = 0.0;
    gyro_time_ = 0.0;
  }

  Measurement gps_measurement(const GpsFix& s) const {
    Measurement m = gps_position_measurement(s, cfg_.origin, cfg_.filter.measurement);
    m.value -= home_;
    return m;
  }

  [[nodiscard]] Vec2d body_velocity() const {
    const NavState& x = filter_.state();
    return (quat_to_rot(x.q()).transpose() * x.v()).head<2>();
  }

  void accumulate_gyro(const ImuSample& s) {
    gyro_sum_ += s.delta_angle - filter_.state().dang_bias();
    gyro_time_ += s.dt;
  }

  bool apply(const Measurement& m) {
    log_.innovations.push_back(filter_.update(m));
    return log_.innovations.back().accepted;
  }

  void close_epoch() {
    if (!epoch_t_) return;
    const NavState& x = filter_.state();
    const StateMatrix& p = filter_.covariance().P;
    NavRecord r;
    r.t = *epoch_t_;
    r.out = output_vector(x, cfg_.filter.nominal_imu_dt);
    r.x = x.x;
    r.variance = p.diagonal();
    r.position_cov = p.block<3, 3>(state_index::kPos, state_index::kPos);
    if (cfg_.audit_covariance) {
      r.cov_asymmetry = (p - p.transpose()).cwiseAbs().maxCoeff();
      r.cov_min_eigenvalue = Eigen::SelfAdjointEigenSolver<StateMatrix>(p, Eigen::EigenvaluesOnly).eigenvalues()(0);
    }
    log_.records.push_back(r);
    epoch_t_.reset();
  }

  FusionConfig cfg_;
  NavFilter filter_;
  NavLog log_;

  Vec3d home_{Vec3d::Zero()};
  std::optional<double> init_start_;
  Vec3d accel_sum_{Vec3d::Zero()};
  double accel_time_{0};
  std::optional<MagSample> last_mag_;

  std::optional<double> epoch_t_;
  std::shared_ptr<const ImageFrame> prev_frame_;
  Vec3d gyro_sum_{Vec3d::Zero()};
  Vec2d body_vel_sum_{Vec2d::Zero()};
  double body_vel_time_{0};
  double gyro_time_{0};
};

}  // namespace

NavLog run_fusion(const std::vector<SensorSample>& timeline, const FusionConfig& config) {
  return FusionRun(config).run(timeline);
}

// --- CSV ---------------------------------------------------------------------------

std::string navlog_csv_header() {
  std::string h = "t,roll,pitch,yaw,vel_n,vel_d,vel_e,pos_n,pos_d,pos_e,gyro_bias_x,gyro_bias_y,gyro_bias_z";
  const std::string states = state_csv_header();
  // Reuse the state names from the snapshot header (skip "t" and the values).
  std::size_t pos = states.find(",var_");
  h += states.substr(pos);
  return h;
}

void write_navlog_csv(const std::filesystem::path& path, const NavLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << navlog_csv_header() << '\n';
  char buf[40];
  for (const auto& r : log.records) {
    const OutputVector& o = r.out;
    const double cols[] = {o.roll,  o.pitch, o.yaw,   o.vel_n,       o.vel_d,       o.vel_e,
                           o.pos_n, o.pos_d, o.pos_e, o.gyro_bias_x, o.gyro_bias_y, o.gyro_bias_z};
    std::snprintf(buf, sizeof buf, "%.6f", r.t);
    out << buf;
    for (const double c : cols) {
      std::snprintf(buf, sizeof buf, ",%.17g", c);
      out << buf;
    }
    for (int i = 0; i < kStateDim; ++i) {
      std::snprintf(buf, sizeof buf, ",%.17g", r.variance(i));
      out << buf;
    }
    out << '\n';
  }
}

void write_innovations_csv(const std::filesystem::path& path, const NavLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "t,kind,accepted,nis,innov_0,innov_1,innov_2,var_0,var_1,var_2\n";
  char buf[40];
  for (const auto& r : log.innovations) {
    std::snprintf(buf, sizeof buf, "%.6f", r.timestamp);
    out << buf << ',' << to_string(r.kind) << ',' << (r.accepted ? 1 : 0);
    std::snprintf(buf, sizeof buf, ",%.17g", r.nis);
    out << buf;
    for (const Eigen::VectorXd* v : {&r.innovation, &r.innovation_variance}) {
      for (Eigen::Index i = 0; i < 3; ++i) {
        if (i < v->size()) {
          std::snprintf(buf, sizeof buf, ",%.17g", (*v)(i));
          out << buf;
        } else {
          out << ',';
        }
      }
    }
    out << '\n';
  }
}

}  // namespace ofnav
