#pragma once

#include <filesystem>
#include <string>

#include "ofnav/optflow.hpp"

namespace ofnav {

/// Reads an 8-bit binary PGM (P5). Intensities are scaled to [0, 1].
/// Throws InvalidInput on anything that is not a well-formed P5 file.
Image read_pgm(const std::filesystem::path& path);

/// Writes intensities in [0, 1] as 8-bit P5, rounding to the nearest level.
void write_pgm(const std::filesystem::path& path, const Image& img);

/// Rounds intensities to the 8-bit levels a PGM round trip would produce.
Image quantize_8bit(const Image& img);

/// One row per pixel: x,y,vx,vy (pixels per frame).
void write_flow_csv(const std::filesystem::path& path, const FlowField& flow);

/// Quiver rendering of a flow field over its source frame, sampled every `stride` pixels.
std::string flow_quiver_svg(const Image& background, const FlowField& flow, int stride, double arrow_scale);

}  // namespace ofnav
