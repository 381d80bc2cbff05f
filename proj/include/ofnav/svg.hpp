#pragma once

// Minimal SVG line plots. Each series becomes one <polyline> whose points are
// the data mapped into the panel, so tests can parse coordinates back.

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace ofnav {

struct PlotSeries {
  std::string label;
  std::string color{"#1f77b4"};
  std::vector<double> x, y;
};

struct PlotPanel {
  std::string title;
  std::string xlabel, ylabel;
  std::vector<PlotSeries> series;
  /// Fixed axis limits {xmin, xmax, ymin, ymax}; data range (with margin) otherwise.
  std::optional<std::array<double, 4>> limits;
  bool equal_aspect{false};
};

/// Panels stacked vertically in one document.
std::string svg_plot(const std::vector<PlotPanel>& panels, int width = 640, int panel_height = 320);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace ofnav
