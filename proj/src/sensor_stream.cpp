#include "ofnav/sensor_stream.hpp"

#include <fstream>
#include <memory>

#include <nlohmann/json.hpp>

#include "ofnav/errors.hpp"
#include "ofnav/image_io.hpp"

namespace ofnav {

using nlohmann::json;

namespace {

json vec3(const Vec3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3d read_vec3(const json& j, const char* key) {
  const json& a = j.at(key);
  if (!a.is_array() || a.size() != 3) throw DataError(std::string("field '") + key + "' must be a 3-element array");
  return Vec3d(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
}

struct ToJson {
  json operator()(const ImuSample& s) const {
    return {{"t", s.timestamp}, {"kind", "imu"}, {"dt", s.dt}, {"dang", vec3(s.delta_angle)},
            {"dvel", vec3(s.delta_velocity)}};
  }
  json operator()(const BaroSample& s) const { return {{"t", s.timestamp}, {"kind", "baro"}, {"alt", s.altitude}}; }
  json operator()(const MagSample& s) const { return {{"t", s.timestamp}, {"kind", "mag"}, {"field", vec3(s.field)}}; }
  json operator()(const GpsFix& s) const {
    return {{"t", s.timestamp},       {"kind", "gps"},           {"lat", s.position.lat},
            {"lon", s.position.lon},  {"alt", s.position.alt},   {"vel", vec3(s.velocity)}};
  }
  json operator()(const CameraSample& s) const {
    if (s.path.empty()) throw InvalidInput("camera sample has no frame path to serialize");
    return {{"t", s.timestamp}, {"kind", "camera"}, {"frame", s.path}};
  }
};

}  // namespace

std::string sensor_to_json_line(const SensorSample& sample) { return std::visit(ToJson{}, sample).dump(); }

SensorSample sensor_from_json_line(std::string_view line, const std::filesystem::path& base_dir, std::size_t line_no,
                                   bool load_frames) {
  const std::string where = "line " + std::to_string(line_no) + ": ";
  try {
    const json j = json::parse(line);
    if (!j.is_object()) throw DataError("expected a JSON object");
    const double t = j.at("t").get<double>();
    if (!std::isfinite(t)) throw DataError("non-finite timestamp");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "imu") {
      ImuSample s;
      s.timestamp = t;
      s.dt = j.at("dt").get<double>();
      s.delta_angle = read_vec3(j, "dang");
      s.delta_velocity = read_vec3(j, "dvel");
      s.validate();
      return s;
    }
    if (kind == "baro") return BaroSample{t, j.at("alt").get<double>()};
    if (kind == "mag") return MagSample{t, read_vec3(j, "field")};
    if (kind == "gps") {
      GpsFix s;
      s.timestamp = t;
      s.position = {j.at("lat").get<double>(), j.at("lon").get<double>(), j.at("alt").get<double>()};
      s.velocity = read_vec3(j, "vel");
      return s;
    }
    if (kind == "camera") {
      CameraSample s;
      s.timestamp = t;
      s.path = j.at("frame").get<std::string>();
      if (load_frames) {
        auto frame = std::make_shared<ImageFrame>();
        frame->pixels = read_pgm(base_dir / s.path);
        frame->timestamp = t;
        s.frame = std::move(frame);
      }
      return s;
    }
    throw DataError("unknown sensor kind '" + kind + "'");
  } catch (const DataError& e) {
    throw DataError(where + e.what());
  } catch (const std::exception& e) {
    throw DataError(where + e.what());
  }
}

void write_sensor_log(const std::filesystem::path& path, const std::vector<SensorSample>& timeline) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& s : timeline) out << sensor_to_json_line(s) << '\n';
}

std::vector<SensorSample> read_sensor_log(const std::filesystem::path& path, bool load_frames) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<SensorSample> out;
  std::string line;
  std::size_t line_no = 0;
  const auto base = path.parent_path();
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    out.push_back(sensor_from_json_line(line, base, line_no, load_frames));
  }
  return out;
}

}  // namespace ofnav
