#include "ofnav/image_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace ofnav {

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  char ch = 0;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string discard;
      std::getline(in, discard);
      if (!tok.empty()) break;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

int parse_positive(const std::string& tok, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw InvalidInput("read_pgm: bad header field '" + tok + "' in " + path.string());
  }
}

}  // namespace

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("read_pgm: cannot open " + path.string());
  if (next_token(in) != "P5") throw InvalidInput("read_pgm: not a binary PGM (P5): " + path.string());
  const int width = parse_positive(next_token(in), path);
  const int height = parse_positive(next_token(in), path);
  const int maxval = parse_positive(next_token(in), path);
  if (maxval > 255) throw InvalidInput("read_pgm: only 8-bit PGM is supported: " + path.string());

  std::vector<unsigned char> buf(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw InvalidInput("read_pgm: truncated pixel data in " + path.string());
  }
  Image img(height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      img(y, x) = static_cast<double>(buf[static_cast<std::size_t>(y) * width + x]) / maxval;
    }
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("write_pgm: cannot open " + path.string());
  out << "P5\n" << img.cols() << ' ' << img.rows() << "\n255\n";
  std::vector<unsigned char> buf(static_cast<std::size_t>(img.size()));
  for (Eigen::Index y = 0; y < img.rows(); ++y) {
    for (Eigen::Index x = 0; x < img.cols(); ++x) {
      const double v = std::clamp(img(y, x), 0.0, 1.0);
      buf[static_cast<std::size_t>(y * img.cols() + x)] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

Image quantize_8bit(const Image& img) {
  return img.unaryExpr([](double v) { return static_cast<double>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0; });
}

void write_flow_csv(const std::filesystem::path& path, const FlowField& flow) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("write_flow_csv: cannot open " + path.string());
  out << "x,y,vx,vy\n";
  char line[96];
  for (Eigen::Index y = 0; y < flow.vx.rows(); ++y) {
    for (Eigen::Index x = 0; x < flow.vx.cols(); ++x) {
      std::snprintf(line, sizeof line, "%ld,%ld,%.6f,%.6f\n", static_cast<long>(x), static_cast<long>(y),
                    flow.vx(y, x), flow.vy(y, x));
      out << line;
    }
  }
}

std::string flow_quiver_svg(const Image& background, const FlowField& flow, int stride, double arrow_scale) {
  const double px = 8.0;  // screen units per image pixel
  const auto w = static_cast<double>(background.cols()) * px;
  const auto h = static_cast<double>(background.rows()) * px;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  for (Eigen::Index y = 0; y < background.rows(); ++y) {
    for (Eigen::Index x = 0; x < background.cols(); ++x) {
      const int g = static_cast<int>(std::lround(std::clamp(background(y, x), 0.0, 1.0) * 255.0));
      svg << "<rect x=\"" << x * px << "\" y=\"" << y * px << "\" width=\"" << px << "\" height=\"" << px
          << "\" fill=\"rgb(" << g << ',' << g << ',' << g << ")\"/>\n";
    }
  }
  svg << "<g stroke=\"#00c000\" stroke-width=\"1.5\">\n";
  for (Eigen::Index y = stride / 2; y < flow.vx.rows(); y += stride) {
    for (Eigen::Index x = stride / 2; x < flow.vx.cols(); x += stride) {
      const double x0 = (static_cast<double>(x) + 0.5) * px, y0 = (static_cast<double>(y) + 0.5) * px;
      const double x1 = x0 + flow.vx(y, x) * px * arrow_scale;
      const double y1 = y0 + flow.vy(y, x) * px * arrow_scale;
      svg << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y1 << "\"/>"
          << "<circle cx=\"" << x1 << "\" cy=\"" << y1 << "\" r=\"1.5\" fill=\"#00c000\"/>\n";
    }
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

}  // namespace ofnav
