#pragma once

// Scenario configuration (JSON) and the simulation pipeline that turns it into
// truth, sensor streams and camera frames.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ofnav/fusion.hpp"
#include "ofnav/sim.hpp"

namespace ofnav {

enum class ScenarioKind { Hover, Mission };

struct ScenarioConfig {
  std::string id{"hover"};
  ScenarioKind kind{ScenarioKind::Hover};
  std::uint64_t seed{1};

  // hover
  double duration{25.0};
  Vec3d hold_position{0.0, 0.0, -10.0};
  HoverConfig hover;

  // mission
  std::vector<Vec3d> waypoints{default_mission_waypoints()};
  double cruise_speed{3.0};
  MissionConfig mission;

  GeoOrigin origin;
  Vec3d earth_field{0.22, 0.0, 0.41};
  CameraIntrinsics camera;
  GroundTexture texture;
  SensorNoiseConfig noise;
  bool render_frames{true};

  FusionConfig fusion;
};

/// Defaults used by the comparison experiments.
ScenarioConfig default_hover_scenario();
ScenarioConfig default_mission_scenario();

/// All sensor noise removed and the filter made (practically) certain of its
/// initial state, so the estimate must reproduce truth.
ScenarioConfig zero_noise(ScenarioConfig config);

/// Starts from the defaults for the document's "scenario" kind and overrides every
/// field present. Unknown keys and out-of-range values throw ConfigError with the
/// dotted field path.
ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioConfig& config);
ScenarioConfig load_scenario_config(const std::filesystem::path& path);

/// FNV-1a 64 of the canonical (sorted-key, compact) JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

struct ScenarioData {
  TruthTrajectory truth;
  std::vector<ImuSample> imu;
  std::vector<GpsFix> gps;
  std::vector<BaroSample> baro;
  std::vector<MagSample> mag;
  std::vector<CameraSample> camera;
  std::size_t degraded_frames{0};

  [[nodiscard]] std::vector<SensorSample> timeline() const;
};

/// Deterministic in the config (including its seed).
ScenarioData simulate(const ScenarioConfig& config);

/// Reference path for cross-track errors: mission waypoints, or the hold point.
std::vector<Vec3d> reference_path(const ScenarioConfig& config);

/// Bundle layout: config.json, truth.csv, sensors.jsonl, frames/NNNNNN.pgm.
void write_bundle(const std::filesystem::path& dir, const ScenarioConfig& config, const ScenarioData& data);

FusionConfig fusion_config_for(const ScenarioConfig& config, bool use_flow);

}  // namespace ofnav
