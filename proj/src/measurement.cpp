#include "ofnav/measurement.hpp"

#include <cmath>

namespace ofnav {

void ImuSample::validate() const {
  if (!(dt > 0.0 && dt <= 0.1)) throw InvalidInput("ImuSample: dt must lie in (0, 0.1]");
  if (!delta_angle.allFinite() || !delta_velocity.allFinite() || !std::isfinite(timestamp)) {
    throw InvalidInput("ImuSample: non-finite increment");
  }
}

double timestamp_of(const SensorSample& s) {
  return std::visit([](const auto& v) { return v.timestamp; }, s);
}

std::string_view kind_name(const SensorSample& s) {
  static constexpr std::string_view names[] = {"imu", "baro", "mag", "gps", "camera"};
  return names[s.index()];
}

std::string_view to_string(MeasurementKind kind) {
  switch (kind) {
    case MeasurementKind::GpsPos: return "gps_pos";
    case MeasurementKind::GpsVel: return "gps_vel";
    case MeasurementKind::Baro: return "baro";
    case MeasurementKind::Mag: return "mag";
    case MeasurementKind::FlowVel: return "flow_vel";
  }
  return "unknown";
}

Eigen::Index measurement_dim(MeasurementKind kind) {
  switch (kind) {
    case MeasurementKind::Baro: return 1;
    case MeasurementKind::FlowVel: return 2;
    default: return 3;
  }
}

void Measurement::validate() const {
  const Eigen::Index n = measurement_dim(kind);
  if (value.size() != n || noise_std.size() != n) {
    throw InvalidInput("Measurement: wrong dimension for " + std::string(to_string(kind)));
  }
  if (!value.allFinite()) throw InvalidInput("Measurement: non-finite value");
  if (!noise_std.allFinite() || (noise_std.array() <= 0.0).any()) {
    throw InvalidInput("Measurement: noise std must be positive");
  }
}

}  // namespace ofnav
