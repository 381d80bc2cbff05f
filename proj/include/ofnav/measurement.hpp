#pragma once

// Raw sensor samples (as emitted by the simulator or read back from a
// scenario bundle) and the filter-level Measurement they are turned into.

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <string_view>
#include <variant>

#include "ofnav/geom.hpp"
#include "ofnav/optflow.hpp"

namespace ofnav {

/// Filter input u_k: angle and velocity increments over one sampling interval.
struct ImuSample {
  double timestamp{0};  // end of the interval
  Vec3d delta_angle{Vec3d::Zero()};     // rad
  Vec3d delta_velocity{Vec3d::Zero()};  // m/s
  double dt{0.01};

  void validate() const;
};

struct GpsFix {
  double timestamp{0};
  GeodeticPoint position;
  Vec3d velocity{Vec3d::Zero()};  // NED m/s
};

struct BaroSample {
  double timestamp{0};
  double altitude{0};  // m above the origin
};

struct MagSample {
  double timestamp{0};
  Vec3d field{Vec3d::Zero()};  // body gauss
};

struct CameraSample {
  double timestamp{0};
  std::shared_ptr<const ImageFrame> frame;
  std::string path;  // relative path inside a scenario bundle, empty for in-memory frames
};

/// Alternative order doubles as the tie-break priority for equal timestamps.
using SensorSample = std::variant<ImuSample, BaroSample, MagSample, GpsFix, CameraSample>;

double timestamp_of(const SensorSample& s);
std::string_view kind_name(const SensorSample& s);

enum class MeasurementKind { GpsPos, GpsVel, Baro, Mag, FlowVel };

std::string_view to_string(MeasurementKind kind);
Eigen::Index measurement_dim(MeasurementKind kind);

/// y_k with its noise standard deviations. FlowVel carries the body-frame
/// horizontal velocity already scaled by the height used for the conversion.
struct Measurement {
  MeasurementKind kind{MeasurementKind::GpsPos};
  double timestamp{0};
  Eigen::VectorXd value;
  Eigen::VectorXd noise_std;
  double h_agl{0};  // FlowVel only

  void validate() const;
};

}  // namespace ofnav
