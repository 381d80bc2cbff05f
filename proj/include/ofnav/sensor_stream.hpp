#pragma once

// JSON-lines sensor logs: one object per sample, {"t": ..., "kind": ..., values...}.
// Camera samples reference a PGM file relative to the log's directory.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ofnav/measurement.hpp"

namespace ofnav {

std::string sensor_to_json_line(const SensorSample& sample);

/// Parses one line. Camera frames are loaded from `base_dir` when `load_frames`
/// is set. Throws DataError mentioning `line_no` on any malformed content.
SensorSample sensor_from_json_line(std::string_view line, const std::filesystem::path& base_dir,
                                   std::size_t line_no, bool load_frames = true);

void write_sensor_log(const std::filesystem::path& path, const std::vector<SensorSample>& timeline);
std::vector<SensorSample> read_sensor_log(const std::filesystem::path& path, bool load_frames = true);

}  // namespace ofnav
