#include "ofnav/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "ofnav/errors.hpp"

namespace ofnav {

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::array<double, 4> data_limits(const PlotPanel& p) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : p.series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) return {0, 1, 0, 1};
  const auto pad = [](double& a, double& b) {
    const double span = b - a;
    const double m = span > 0 ? 0.05 * span : std::max(1e-3, 0.05 * std::abs(a) + 0.5);
    a -= m;
    b += m;
  };
  pad(x0, x1);
  pad(y0, y1);
  return {x0, x1, y0, y1};
}

}  // namespace

std::string svg_plot(const std::vector<PlotPanel>& panels, int width, int panel_height) {
  const int height = panel_height * static_cast<int>(std::max<std::size_t>(1, panels.size()));
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  constexpr double left = 60, right = 130, top = 28, bottom = 40;
  for (std::size_t k = 0; k < panels.size(); ++k) {
    const PlotPanel& p = panels[k];
    const double oy = static_cast<double>(k) * panel_height;
    double pw = width - left - right, ph = panel_height - top - bottom;
    auto [x0, x1, y0, y1] = p.limits ? *p.limits : data_limits(p);
    if (p.equal_aspect) {
      // Grow the tighter axis so one unit has the same length on both.
      const double sx = (x1 - x0) / pw, sy = (y1 - y0) / ph;
      if (sx > sy) {
        const double c = 0.5 * (y0 + y1), half = 0.5 * sx * ph;
        y0 = c - half;
        y1 = c + half;
      } else {
        const double c = 0.5 * (x0 + x1), half = 0.5 * sy * pw;
        x0 = c - half;
        x1 = c + half;
      }
    }
    const auto mx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    const auto my = [&](double y) { return oy + top + (y1 - y) / (y1 - y0) * ph; };

    out << "<g class=\"panel\" data-limits=\"" << tick(x0) << ' ' << tick(x1) << ' ' << tick(y0) << ' ' << tick(y1)
        << "\">\n";
    out << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << fmt(oy + 18)
        << "\" text-anchor=\"middle\" font-size=\"14\">" << escape(p.title) << "</text>\n";
    out << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(oy + top) << "\" width=\"" << fmt(pw) << "\" height=\""
        << fmt(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
      const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
      out << "<text x=\"" << fmt(mx(xv)) << "\" y=\"" << fmt(oy + top + ph + 14)
          << "\" text-anchor=\"middle\" font-size=\"10\">" << tick(xv) << "</text>\n";
      out << "<text x=\"" << fmt(left - 4) << "\" y=\"" << fmt(my(yv) + 3)
          << "\" text-anchor=\"end\" font-size=\"10\">" << tick(yv) << "</text>\n";
    }
    out << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << fmt(oy + panel_height - 8)
        << "\" text-anchor=\"middle\" font-size=\"12\">" << escape(p.xlabel) << "</text>\n";
    out << "<text x=\"14\" y=\"" << fmt(oy + top + ph / 2) << "\" text-anchor=\"middle\" font-size=\"12\" "
        << "transform=\"rotate(-90 14 " << fmt(oy + top + ph / 2) << ")\">" << escape(p.ylabel) << "</text>\n";

    for (std::size_t s = 0; s < p.series.size(); ++s) {
      const PlotSeries& series = p.series[s];
      out << "<polyline class=\"series\" data-label=\"" << escape(series.label) << "\" fill=\"none\" stroke=\""
          << escape(series.color) << "\" stroke-width=\"1.2\" points=\"";
      const std::size_t n = std::min(series.x.size(), series.y.size());
      for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(series.x[i]) || !std::isfinite(series.y[i])) continue;
        out << (i ? " " : "") << fmt(mx(series.x[i])) << ',' << fmt(my(series.y[i]));
      }
      out << "\"/>\n";
      const double ly = oy + top + 14 + 16.0 * static_cast<double>(s);
      out << "<line x1=\"" << fmt(left + pw + 10) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\"" << fmt(left + pw + 28)
          << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << escape(series.color) << "\" stroke-width=\"2\"/>\n";
      out << "<text x=\"" << fmt(left + pw + 32) << "\" y=\"" << fmt(ly) << "\" font-size=\"11\">"
          << escape(series.label) << "</text>\n";
    }
    out << "</g>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << content;
}

}  // namespace ofnav
