#include "ofnav/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>

#include "ofnav/errors.hpp"
#include "ofnav/eval.hpp"
#include "ofnav/image_io.hpp"
#include "ofnav/sensor_stream.hpp"

namespace ofnav {

using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

enum class Range { Any, NonNegative, Positive, Fraction };

// Reads one JSON object, remembering which keys were consumed so that typos
// surface as errors instead of being silently ignored.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  [[nodiscard]] std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out, Range range = Range::Any) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (!v->is_number()) fail(field(key), "expected a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) fail(field(key), "must be finite");
    switch (range) {
      case Range::Any: break;
      case Range::NonNegative:
        if (x < 0.0) fail(field(key), "must be >= 0");
        break;
      case Range::Positive:
        if (x <= 0.0) fail(field(key), "must be > 0");
        break;
      case Range::Fraction:
        if (x <= 0.0 || x >= 1.0) fail(field(key), "must lie strictly between 0 and 1");
        break;
    }
    out = x;
  }

  void integer(const std::string& key, int& out, int min_value) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (!v->is_number_integer()) fail(field(key), "expected an integer");
    const auto x = v->get<long long>();
    if (x < min_value || x > std::numeric_limits<int>::max()) {
      fail(field(key), "must be an integer >= " + std::to_string(min_value));
    }
    out = static_cast<int>(x);
  }

  void odd_integer(const std::string& key, int& out, int min_value) {
    integer(key, out, min_value);
    if (out % 2 == 0) fail(field(key), "must be odd");
  }

  void seed(const std::string& key, std::uint64_t& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (!v->is_number_unsigned()) fail(field(key), "expected a non-negative integer");
    out = v->get<std::uint64_t>();
  }

  void boolean(const std::string& key, bool& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (!v->is_boolean()) fail(field(key), "expected true or false");
    out = v->get<bool>();
  }

  void string(const std::string& key, std::string& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (!v->is_string()) fail(field(key), "expected a string");
    out = v->get<std::string>();
  }

  static Vec3d to_vec3(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 3) fail(where, "expected an array of 3 numbers");
    Vec3d out;
    for (int i = 0; i < 3; ++i) {
      if (!v[static_cast<std::size_t>(i)].is_number()) fail(where, "expected an array of 3 numbers");
      out(i) = v[static_cast<std::size_t>(i)].get<double>();
    }
    if (!out.allFinite()) fail(where, "must be finite");
    return out;
  }

  void vec3(const std::string& key, Vec3d& out) {
    if (const json* v = find(key)) out = to_vec3(*v, field(key));
  }

  /// Checks that every key of the object was consumed.
  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (seen_.count(key) == 0) fail(field(key), "unknown field");
    }
  }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class Fn>
void with_section(Section& parent, const std::string& key, Fn&& fn) {
  if (const json* v = parent.find(key)) {
    Section s(*v, parent.field(key));
    fn(s);
    s.finish();
  }
}

json vec3_json(const Vec3d& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

// --- defaults ----------------------------------------------------------------------

namespace {

void apply_default_noise(SensorNoiseConfig& n) {
  n.gyro_noise_density = 3e-4;
  n.accel_noise_density = 4e-3;
  n.gyro_bias = Vec3d(2e-3, -1.5e-3, 1e-3);
  n.accel_bias = Vec3d(0.04, -0.03, 0.05);
  n.imu_rate_hz = 100.0;
  n.gps_horizontal_std = 1.2;
  n.gps_vertical_std = 2.0;
  n.gps_correlation_time = 30.0;
  n.gps_white_std = 0.2;
  n.gps_velocity_std = 0.1;
  n.gps_rate_hz = 5.0;
  n.baro_std = 0.5;
  n.baro_rate_hz = 20.0;
  n.mag_std = 0.005;
  n.mag_rate_hz = 10.0;
  n.camera_rate_hz = 15.0;
}

}  // namespace

ScenarioConfig default_hover_scenario() {
  ScenarioConfig c;
  c.id = "hover";
  c.kind = ScenarioKind::Hover;
  apply_default_noise(c.noise);
  c.fusion.filter.nominal_imu_dt = 1.0 / c.noise.imu_rate_hz;
  return c;
}

ScenarioConfig default_mission_scenario() {
  ScenarioConfig c = default_hover_scenario();
  c.id = "mission";
  c.kind = ScenarioKind::Mission;
  return c;
}

ScenarioConfig zero_noise(ScenarioConfig c) {
  SensorNoiseConfig& n = c.noise;
  n.gyro_noise_density = n.accel_noise_density = 0.0;
  n.gyro_bias.setZero();
  n.accel_bias.setZero();
  n.gps_horizontal_std = n.gps_vertical_std = n.gps_white_std = n.gps_velocity_std = 0.0;
  n.baro_std = n.mag_std = 0.0;

  InitConfig& init = c.fusion.filter.init;
  init.pos_std_horizontal = init.pos_std_vertical = init.vel_std = 1e-15;
  init.tilt_std = init.yaw_std = 1e-15;
  init.dang_bias_std = init.dvel_bias_std = init.wind_std = 1e-15;
  init.mag_earth_std = init.mag_body_std = 1e-15;
  c.fusion.filter.process = ProcessNoise{0, 0, 0, 0, 0, 0, 0};
  return c;
}

// --- JSON --------------------------------------------------------------------------

ScenarioConfig scenario_from_json(const json& j) {
  Section root(j, "");
  std::string kind = "hover";
  root.string("scenario", kind);
  ScenarioConfig c;
  if (kind == "hover") {
    c = default_hover_scenario();
  } else if (kind == "mission") {
    c = default_mission_scenario();
  } else {
    Section::fail("scenario", "must be \"hover\" or \"mission\"");
  }
  root.string("id", c.id);
  root.seed("seed", c.seed);
  root.number("duration", c.duration, Range::Positive);
  root.vec3("hold_position", c.hold_position);
  root.number("cruise_speed", c.cruise_speed, Range::Positive);
  root.vec3("earth_field", c.earth_field);
  root.boolean("render_frames", c.render_frames);

  if (const json* w = root.find("waypoints")) {
    if (!w->is_array() || w->size() < 2) Section::fail("waypoints", "expected an array of at least 2 points");
    c.waypoints.clear();
    for (std::size_t i = 0; i < w->size(); ++i) {
      c.waypoints.push_back(Section::to_vec3((*w)[i], "waypoints[" + std::to_string(i) + "]"));
    }
  }

  with_section(root, "hover", [&](Section& s) {
    s.number("settle_time", c.hover.settle_time, Range::NonNegative);
    s.number("dither_std", c.hover.dither_std, Range::NonNegative);
    s.number("dither_bandwidth", c.hover.dither_bandwidth, Range::Positive);
    s.number("dither_vertical_std", c.hover.dither_vertical_std, Range::NonNegative);
  });
  with_section(root, "mission", [&](Section& s) {
    s.number("settle_time", c.mission.settle_time, Range::NonNegative);
    s.number("accel_limit", c.mission.accel_limit, Range::Positive);
    s.number("vertical_speed", c.mission.vertical_speed, Range::Positive);
    s.number("yaw_rate", c.mission.yaw_rate, Range::Positive);
    s.number("tilt_smoothing", c.mission.tilt_smoothing, Range::Positive);
  });
  with_section(root, "origin", [&](Section& s) {
    double lat = c.origin.lat / kDeg, lon = c.origin.lon / kDeg;
    s.number("lat_deg", lat);
    s.number("lon_deg", lon);
    s.number("alt", c.origin.alt);
    if (std::abs(lat) > 90.0) Section::fail(s.field("lat_deg"), "must lie in [-90, 90]");
    if (std::abs(lon) > 180.0) Section::fail(s.field("lon_deg"), "must lie in [-180, 180]");
    c.origin.lat = lat * kDeg;
    c.origin.lon = lon * kDeg;
  });
  with_section(root, "camera", [&](Section& s) {
    s.number("focal_px", c.camera.focal_px, Range::Positive);
    s.number("cx", c.camera.cx);
    s.number("cy", c.camera.cy);
    s.integer("width", c.camera.width, 16);
    s.integer("height", c.camera.height, 16);
  });
  with_section(root, "texture", [&](Section& s) {
    s.seed("seed", c.texture.seed);
    s.number("base_wavelength", c.texture.base_wavelength, Range::Positive);
    s.integer("octaves", c.texture.octaves, 1);
    s.number("persistence", c.texture.persistence, Range::Positive);
    s.number("contrast", c.texture.contrast, Range::Positive);
  });
  with_section(root, "noise", [&](Section& s) {
    SensorNoiseConfig& n = c.noise;
    s.number("gyro_noise_density", n.gyro_noise_density, Range::NonNegative);
    s.number("accel_noise_density", n.accel_noise_density, Range::NonNegative);
    s.vec3("gyro_bias", n.gyro_bias);
    s.vec3("accel_bias", n.accel_bias);
    s.number("imu_rate_hz", n.imu_rate_hz, Range::Positive);
    s.number("gps_horizontal_std", n.gps_horizontal_std, Range::NonNegative);
    s.number("gps_vertical_std", n.gps_vertical_std, Range::NonNegative);
    s.number("gps_correlation_time", n.gps_correlation_time, Range::Positive);
    s.number("gps_white_std", n.gps_white_std, Range::NonNegative);
    s.number("gps_velocity_std", n.gps_velocity_std, Range::NonNegative);
    s.number("gps_rate_hz", n.gps_rate_hz, Range::Positive);
    s.number("baro_std", n.baro_std, Range::NonNegative);
    s.number("baro_rate_hz", n.baro_rate_hz, Range::Positive);
    s.number("mag_std", n.mag_std, Range::NonNegative);
    s.number("mag_rate_hz", n.mag_rate_hz, Range::Positive);
    s.number("camera_rate_hz", n.camera_rate_hz, Range::Positive);
  });
  with_section(root, "filter", [&](Section& s) {
    FilterConfig& f = c.fusion.filter;
    with_section(s, "init", [&](Section& i) {
      i.number("pos_std_horizontal", f.init.pos_std_horizontal, Range::Positive);
      i.number("pos_std_vertical", f.init.pos_std_vertical, Range::Positive);
      i.number("vel_std", f.init.vel_std, Range::Positive);
      i.number("tilt_std", f.init.tilt_std, Range::Positive);
      i.number("yaw_std", f.init.yaw_std, Range::Positive);
      i.number("dang_bias_std", f.init.dang_bias_std, Range::Positive);
      i.number("dvel_bias_std", f.init.dvel_bias_std, Range::Positive);
      i.number("wind_std", f.init.wind_std, Range::Positive);
      i.number("mag_earth_std", f.init.mag_earth_std, Range::Positive);
      i.number("mag_body_std", f.init.mag_body_std, Range::Positive);
    });
    with_section(s, "process", [&](Section& p) {
      p.number("gyro_noise", f.process.gyro_noise, Range::NonNegative);
      p.number("accel_noise", f.process.accel_noise, Range::NonNegative);
      p.number("dang_bias_density", f.process.dang_bias_density, Range::NonNegative);
      p.number("dvel_bias_density", f.process.dvel_bias_density, Range::NonNegative);
      p.number("wind_density", f.process.wind_density, Range::NonNegative);
      p.number("mag_earth_density", f.process.mag_earth_density, Range::NonNegative);
      p.number("mag_body_density", f.process.mag_body_density, Range::NonNegative);
    });
    with_section(s, "measurement", [&](Section& m) {
      m.number("gps_pos_horizontal", f.measurement.gps_pos_horizontal, Range::Positive);
      m.number("gps_pos_vertical", f.measurement.gps_pos_vertical, Range::Positive);
      m.number("gps_vel", f.measurement.gps_vel, Range::Positive);
      m.number("baro", f.measurement.baro, Range::Positive);
      m.number("mag", f.measurement.mag, Range::Positive);
      m.number("flow_vel", f.measurement.flow_vel, Range::Positive);
    });
    s.boolean("innovation_gating", f.innovation_gating);
  });
  with_section(root, "flow", [&](Section& s) {
    FlowParams& p = c.fusion.flow;
    s.integer("pyramid_levels", p.pyramid_levels, 1);
    s.number("pyramid_scale", p.pyramid_scale, Range::Fraction);
    s.integer("iterations_per_level", p.iterations_per_level, 1);
    s.odd_integer("expansion_window", p.expansion_window, 3);
    s.number("expansion_sigma", p.expansion_sigma, Range::Positive);
    s.odd_integer("averaging_window", p.averaging_window, 3);
    s.number("max_displacement", p.max_displacement, Range::Positive);
  });
  with_section(root, "fusion", [&](Section& s) {
    s.boolean("use_flow", c.fusion.use_flow);
    s.number("init_window", c.fusion.init_window, Range::Positive);
    s.integer("flow_border_margin", c.fusion.flow_border_margin, 0);
    s.number("min_texture_strength", c.fusion.min_texture_strength, Range::NonNegative);
    s.boolean("fuse_gps_velocity", c.fusion.fuse_gps_velocity);
    s.boolean("home_from_first_fix", c.fusion.home_from_first_fix);
  });
  root.finish();

  c.fusion.filter.nominal_imu_dt = 1.0 / c.noise.imu_rate_hz;
  try {
    c.camera.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("camera: ") + e.what());
  }
  if (c.kind == ScenarioKind::Hover && !(-c.hold_position.z() > 0.5)) {
    throw ConfigError("hold_position: must be more than 0.5 m above ground (negative down component)");
  }
  return c;
}

json scenario_to_json(const ScenarioConfig& c) {
  json j;
  j["id"] = c.id;
  j["scenario"] = c.kind == ScenarioKind::Hover ? "hover" : "mission";
  j["seed"] = c.seed;
  j["duration"] = c.duration;
  j["hold_position"] = vec3_json(c.hold_position);
  j["cruise_speed"] = c.cruise_speed;
  j["earth_field"] = vec3_json(c.earth_field);
  j["render_frames"] = c.render_frames;
  j["waypoints"] = json::array();
  for (const auto& w : c.waypoints) j["waypoints"].push_back(vec3_json(w));
  j["hover"] = {{"settle_time", c.hover.settle_time},
                {"dither_std", c.hover.dither_std},
                {"dither_bandwidth", c.hover.dither_bandwidth},
                {"dither_vertical_std", c.hover.dither_vertical_std}};
  j["mission"] = {{"settle_time", c.mission.settle_time},       {"accel_limit", c.mission.accel_limit},
                  {"vertical_speed", c.mission.vertical_speed}, {"yaw_rate", c.mission.yaw_rate},
                  {"tilt_smoothing", c.mission.tilt_smoothing}};
  j["origin"] = {{"lat_deg", c.origin.lat / kDeg}, {"lon_deg", c.origin.lon / kDeg}, {"alt", c.origin.alt}};
  j["camera"] = {{"focal_px", c.camera.focal_px}, {"cx", c.camera.cx},
                 {"cy", c.camera.cy},             {"width", c.camera.width},
                 {"height", c.camera.height}};
  j["texture"] = {{"seed", c.texture.seed},
                  {"base_wavelength", c.texture.base_wavelength},
                  {"octaves", c.texture.octaves},
                  {"persistence", c.texture.persistence},
                  {"contrast", c.texture.contrast}};
  const SensorNoiseConfig& n = c.noise;
  j["noise"] = {{"gyro_noise_density", n.gyro_noise_density},
                {"accel_noise_density", n.accel_noise_density},
                {"gyro_bias", vec3_json(n.gyro_bias)},
                {"accel_bias", vec3_json(n.accel_bias)},
                {"imu_rate_hz", n.imu_rate_hz},
                {"gps_horizontal_std", n.gps_horizontal_std},
                {"gps_vertical_std", n.gps_vertical_std},
                {"gps_correlation_time", n.gps_correlation_time},
                {"gps_white_std", n.gps_white_std},
                {"gps_velocity_std", n.gps_velocity_std},
                {"gps_rate_hz", n.gps_rate_hz},
                {"baro_std", n.baro_std},
                {"baro_rate_hz", n.baro_rate_hz},
                {"mag_std", n.mag_std},
                {"mag_rate_hz", n.mag_rate_hz},
                {"camera_rate_hz", n.camera_rate_hz}};
  const FilterConfig& f = c.fusion.filter;
  j["filter"] = {
      {"init",
       {{"pos_std_horizontal", f.init.pos_std_horizontal},
        {"pos_std_vertical", f.init.pos_std_vertical},
        {"vel_std", f.init.vel_std},
        {"tilt_std", f.init.tilt_std},
        {"yaw_std", f.init.yaw_std},
        {"dang_bias_std", f.init.dang_bias_std},
        {"dvel_bias_std", f.init.dvel_bias_std},
        {"wind_std", f.init.wind_std},
        {"mag_earth_std", f.init.mag_earth_std},
        {"mag_body_std", f.init.mag_body_std}}},
      {"process",
       {{"gyro_noise", f.process.gyro_noise},
        {"accel_noise", f.process.accel_noise},
        {"dang_bias_density", f.process.dang_bias_density},
        {"dvel_bias_density", f.process.dvel_bias_density},
        {"wind_density", f.process.wind_density},
        {"mag_earth_density", f.process.mag_earth_density},
        {"mag_body_density", f.process.mag_body_density}}},
      {"measurement",
       {{"gps_pos_horizontal", f.measurement.gps_pos_horizontal},
        {"gps_pos_vertical", f.measurement.gps_pos_vertical},
        {"gps_vel", f.measurement.gps_vel},
        {"baro", f.measurement.baro},
        {"mag", f.measurement.mag},
        {"flow_vel", f.measurement.flow_vel}}},
      {"innovation_gating", f.innovation_gating}};
  const FlowParams& p = c.fusion.flow;
  j["flow"] = {{"pyramid_levels", p.pyramid_levels},
               {"pyramid_scale", p.pyramid_scale},
               {"iterations_per_level", p.iterations_per_level},
               {"expansion_window", p.expansion_window},
               {"expansion_sigma", p.expansion_sigma},
               {"averaging_window", p.averaging_window},
               {"max_displacement", p.max_displacement}};
  j["fusion"] = {{"use_flow", c.fusion.use_flow},
                 {"init_window", c.fusion.init_window},
                 {"flow_border_margin", c.fusion.flow_border_margin},
                 {"min_texture_strength", c.fusion.min_texture_strength},
                 {"fuse_gps_velocity", c.fusion.fuse_gps_velocity},
                 {"home_from_first_fix", c.fusion.home_from_first_fix}};
  return j;
}

ScenarioConfig load_scenario_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return scenario_from_json(j);
}

std::string config_hash(const json& j) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const char ch : j.dump()) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// --- simulation --------------------------------------------------------------------

std::vector<SensorSample> ScenarioData::timeline() const {
  std::vector<NamedStream> streams(5);
  streams[0].name = "imu";
  streams[0].samples.assign(imu.begin(), imu.end());
  streams[1].name = "baro";
  streams[1].samples.assign(baro.begin(), baro.end());
  streams[2].name = "mag";
  streams[2].samples.assign(mag.begin(), mag.end());
  streams[3].name = "gps";
  streams[3].samples.assign(gps.begin(), gps.end());
  streams[4].name = "camera";
  streams[4].samples.assign(camera.begin(), camera.end());
  return merge_streams(streams);
}

namespace {

// Sample times k / rate snapped to the truth grid.
std::vector<std::size_t> sample_indices(const TruthTrajectory& truth, double rate_hz) {
  std::vector<std::size_t> out;
  const double end = truth.end_time();
  for (std::size_t k = 0;; ++k) {
    const double t = truth.start_time() + static_cast<double>(k) / rate_hz;
    if (t > end + 1e-9) break;
    const std::size_t i = truth.index_at(t);
    if (out.empty() || i != out.back()) out.push_back(i);
  }
  return out;
}

}  // namespace

ScenarioData simulate(const ScenarioConfig& c) {
  c.noise.validate();
  ScenarioData d;
  if (c.kind == ScenarioKind::Hover) {
    HoverConfig hc = c.hover;
    hc.rate_hz = c.noise.imu_rate_hz;
    hc.seed = c.seed;
    d.truth = hover_trajectory(c.duration, c.hold_position, hc);
  } else {
    MissionConfig mc = c.mission;
    mc.rate_hz = c.noise.imu_rate_hz;
    d.truth = waypoint_trajectory(c.waypoints, c.cruise_speed, mc);
  }
  const TruthTrajectory& truth = d.truth;

  RngStream imu_rng(c.seed, "imu");
  d.imu.reserve(truth.samples.size());
  for (std::size_t k = 0; k + 1 < truth.samples.size(); ++k) d.imu.push_back(sample_imu(truth, k, c.noise, imu_rng));

  RngStream gps_rng(c.seed, "gps");
  RngStream gm_rng(c.seed, "gps_markov");
  GpsErrorModel gm(c.noise, gm_rng);
  double last_t = truth.start_time();
  for (const std::size_t i : sample_indices(truth, c.noise.gps_rate_hz)) {
    const double t = truth.samples[i].t;
    if (!d.gps.empty()) gm.step(t - last_t);
    last_t = t;
    d.gps.push_back(sample_gps(truth, t, gm.current(), c.noise, c.origin, gps_rng));
  }

  RngStream baro_rng(c.seed, "baro");
  for (const std::size_t i : sample_indices(truth, c.noise.baro_rate_hz)) {
    d.baro.push_back(sample_baro(truth, truth.samples[i].t, c.noise, baro_rng));
  }
  RngStream mag_rng(c.seed, "mag");
  for (const std::size_t i : sample_indices(truth, c.noise.mag_rate_hz)) {
    d.mag.push_back(sample_mag(truth, truth.samples[i].t, c.earth_field, c.noise, mag_rng));
  }

  if (c.render_frames) {
    std::size_t n = 0;
    for (const std::size_t i : sample_indices(truth, c.noise.camera_rate_hz)) {
      RenderResult r = render_ground_image(truth.samples[i], c.texture, c.camera);
      if (r.degraded) ++d.degraded_frames;
      auto frame = std::make_shared<ImageFrame>();
      frame->pixels = quantize_8bit(r.frame.pixels);
      frame->timestamp = truth.samples[i].t;
      char name[32];
      std::snprintf(name, sizeof name, "frames/%06zu.pgm", n++);
      d.camera.push_back(CameraSample{frame->timestamp, std::move(frame), name});
    }
  }
  return d;
}

std::vector<Vec3d> reference_path(const ScenarioConfig& c) {
  if (c.kind == ScenarioKind::Hover) return {c.hold_position};
  return c.waypoints;
}

void write_bundle(const std::filesystem::path& dir, const ScenarioConfig& config, const ScenarioData& data) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "frames", ec);
  if (ec) throw DataError("cannot create " + (dir / "frames").string() + ": " + ec.message());
  {
    std::ofstream out(dir / "config.json", std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / "config.json").string());
    out << scenario_to_json(config).dump(2) << '\n';
  }
  write_truth_csv(dir / "truth.csv", data.truth);
  for (const auto& cam : data.camera) write_pgm(dir / cam.path, cam.frame->pixels);
  write_sensor_log(dir / "sensors.jsonl", data.timeline());
}

FusionConfig fusion_config_for(const ScenarioConfig& config, bool use_flow) {
  FusionConfig f = config.fusion;
  f.use_flow = use_flow;
  f.camera = config.camera;
  f.origin = config.origin;
  f.filter.init.earth_field = config.earth_field;
  f.filter.nominal_imu_dt = 1.0 / config.noise.imu_rate_hz;
  return f;
}

}  // namespace ofnav
