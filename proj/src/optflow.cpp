#include "ofnav/optflow.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace ofnav {

namespace {

// Polynomial basis order used by the expansion: 1, x, y, x^2, y^2, xy.
constexpr int kBasis = 6;

double median_of(std::vector<double> values) {
  const auto mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidInput(std::string(what) + ": dimension mismatch");
  }
}

Image zeros_like(const Image& img) { return Image::Zero(img.rows(), img.cols()); }

}  // namespace

void ImageFrame::validate() const {
  if (width() < 16 || height() < 16) {
    throw InvalidInput("ImageFrame: frames must be at least 16x16");
  }
  if (!pixels.allFinite() || (pixels < 0.0).any() || (pixels > 1.0).any()) {
    throw InvalidInput("ImageFrame: intensities must be finite and in [0, 1]");
  }
}

void FlowParams::validate() const {
  if (expansion_window < 3 || expansion_window % 2 == 0) {
    throw InvalidParameter("FlowParams: expansion_window must be odd and >= 3");
  }
  if (averaging_window < 3 || averaging_window % 2 == 0) {
    throw InvalidParameter("FlowParams: averaging_window must be odd and >= 3");
  }
  if (!(pyramid_scale > 0.0 && pyramid_scale < 1.0)) {
    throw InvalidParameter("FlowParams: pyramid_scale must lie in (0, 1)");
  }
  if (pyramid_levels < 1 || iterations_per_level < 1) {
    throw InvalidParameter("FlowParams: levels and iterations must be >= 1");
  }
  if (!(expansion_sigma > 0.0)) {
    throw InvalidParameter("FlowParams: expansion_sigma must be positive");
  }
  if (!(max_displacement > 0.0)) {
    throw InvalidParameter("FlowParams: max_displacement must be positive");
  }
}

void CameraIntrinsics::validate() const {
  if (!(focal_px > 0.0)) throw InvalidParameter("CameraIntrinsics: focal length must be positive");
  if (width < 16 || height < 16) throw InvalidParameter("CameraIntrinsics: image must be at least 16x16");
  if (!(cx >= 0 && cx <= width - 1 && cy >= 0 && cy <= height - 1)) {
    throw InvalidParameter("CameraIntrinsics: principal point outside the image");
  }
}

// --- separable filtering -------------------------------------------------------

Image correlate_rows(const Image& img, const Eigen::ArrayXd& kernel) {
  const Eigen::Index half = kernel.size() / 2;
  const Eigen::Index rows = img.rows(), cols = img.cols();
  Image out(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      double acc = 0.0;
      for (Eigen::Index k = -half; k <= half; ++k) {
        const Eigen::Index xs = std::clamp<Eigen::Index>(x + k, 0, cols - 1);
        acc += kernel(k + half) * img(y, xs);
      }
      out(y, x) = acc;
    }
  }
  return out;
}

Image correlate_cols(const Image& img, const Eigen::ArrayXd& kernel) {
  const Eigen::Index half = kernel.size() / 2;
  const Eigen::Index rows = img.rows(), cols = img.cols();
  Image out = Image::Zero(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index k = -half; k <= half; ++k) {
      const Eigen::Index ys = std::clamp<Eigen::Index>(y + k, 0, rows - 1);
      out.row(y) += kernel(k + half) * img.row(ys);
    }
  }
  return out;
}

Eigen::ArrayXd gaussian_kernel(int size, double sigma) {
  const int half = size / 2;
  Eigen::ArrayXd k(size);
  for (int i = -half; i <= half; ++i) k(i + half) = std::exp(-0.5 * i * i / (sigma * sigma));
  return k / k.sum();
}

Image gaussian_blur(const Image& img, double sigma) {
  const int half = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  const Eigen::ArrayXd k = gaussian_kernel(2 * half + 1, sigma);
  return correlate_cols(correlate_rows(img, k), k);
}

double sample_bilinear(const Image& img, double x, double y) {
  const double xc = std::clamp(x, 0.0, static_cast<double>(img.cols() - 1));
  const double yc = std::clamp(y, 0.0, static_cast<double>(img.rows() - 1));
  const auto x0 = static_cast<Eigen::Index>(std::floor(xc));
  const auto y0 = static_cast<Eigen::Index>(std::floor(yc));
  const Eigen::Index x1 = std::min<Eigen::Index>(x0 + 1, img.cols() - 1);
  const Eigen::Index y1 = std::min<Eigen::Index>(y0 + 1, img.rows() - 1);
  const double fx = xc - static_cast<double>(x0), fy = yc - static_cast<double>(y0);
  return (1 - fy) * ((1 - fx) * img(y0, x0) + fx * img(y0, x1)) + fy * ((1 - fx) * img(y1, x0) + fx * img(y1, x1));
}

Image resize_bilinear(const Image& img, Eigen::Index rows, Eigen::Index cols) {
  Image out(rows, cols);
  const double sx = static_cast<double>(img.cols()) / static_cast<double>(cols);
  const double sy = static_cast<double>(img.rows()) / static_cast<double>(rows);
  for (Eigen::Index y = 0; y < rows; ++y) {
    const double ys = (static_cast<double>(y) + 0.5) * sy - 0.5;
    for (Eigen::Index x = 0; x < cols; ++x) {
      out(y, x) = sample_bilinear(img, (static_cast<double>(x) + 0.5) * sx - 0.5, ys);
    }
  }
  return out;
}

// --- polynomial expansion ----------------------------------------------------------

PolyField poly_expansion(const Image& img, int n, double sigma) {
  if (n < 3 || n % 2 == 0) throw InvalidParameter("poly_expansion: window must be odd and >= 3");
  if (!(sigma > 0.0)) throw InvalidParameter("poly_expansion: sigma must be positive");
  if (n > std::min(img.rows(), img.cols())) {
    throw InvalidParameter("poly_expansion: window larger than the image");
  }

  const int half = n / 2;
  Eigen::ArrayXd g(n), xg(n), xxg(n);
  for (int i = -half; i <= half; ++i) {
    const double w = std::exp(-0.5 * i * i / (sigma * sigma));
    g(i + half) = w;
    xg(i + half) = i * w;
    xxg(i + half) = i * i * w;
  }

  // Normal matrix of the weighted fit; identical for every pixel because the
  // borders are handled by replicated extension.
  Eigen::Matrix<double, kBasis, kBasis> gram = Eigen::Matrix<double, kBasis, kBasis>::Zero();
  for (int y = -half; y <= half; ++y) {
    for (int x = -half; x <= half; ++x) {
      const double w = g(x + half) * g(y + half);
      Eigen::Matrix<double, kBasis, 1> basis;
      basis << 1.0, x, y, x * x, y * y, x * y;
      gram += w * basis * basis.transpose();
    }
  }
  const Eigen::Matrix<double, kBasis, kBasis> gram_inv = gram.inverse();

  const Image h0 = correlate_rows(img, g);
  const Image h1 = correlate_rows(img, xg);
  const Image h2 = correlate_rows(img, xxg);

  const Image m1 = correlate_cols(h0, g);
  const Image mx = correlate_cols(h1, g);
  const Image my = correlate_cols(h0, xg);
  const Image mxx = correlate_cols(h2, g);
  const Image myy = correlate_cols(h0, xxg);
  const Image mxy = correlate_cols(h1, xg);

  PolyField p{zeros_like(img), zeros_like(img), zeros_like(img), zeros_like(img), zeros_like(img), zeros_like(img)};
  for (Eigen::Index y = 0; y < img.rows(); ++y) {
    for (Eigen::Index x = 0; x < img.cols(); ++x) {
      Eigen::Matrix<double, kBasis, 1> m;
      m << m1(y, x), mx(y, x), my(y, x), mxx(y, x), myy(y, x), mxy(y, x);
      const Eigen::Matrix<double, kBasis, 1> r = gram_inv * m;
      p.c(y, x) = r(0);
      p.b1(y, x) = r(1);
      p.b2(y, x) = r(2);
      p.a11(y, x) = r(3);
      p.a22(y, x) = r(4);
      p.a12(y, x) = 0.5 * r(5);
    }
  }
  return p;
}

// --- displacement estimation -------------------------------------------------------

FlowField flow_iteration(const PolyField& p1, const PolyField& p2, const FlowField& prior, int w) {
  if (w < 3 || w % 2 == 0) throw InvalidParameter("flow_iteration: window must be odd and >= 3");
  require_same_shape(p1.c, p2.c, "flow_iteration");
  require_same_shape(p1.c, prior.vx, "flow_iteration");
  require_same_shape(prior.vx, prior.vy, "flow_iteration");

  const Eigen::Index rows = p1.c.rows(), cols = p1.c.cols();
  Image g11(rows, cols), g12(rows, cols), g22(rows, cols), h1(rows, cols), h2(rows, cols);

  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      const double dx = std::round(prior.vx(y, x));
      const double dy = std::round(prior.vy(y, x));
      const Eigen::Index xs = std::clamp<Eigen::Index>(x + static_cast<Eigen::Index>(dx), 0, cols - 1);
      const Eigen::Index ys = std::clamp<Eigen::Index>(y + static_cast<Eigen::Index>(dy), 0, rows - 1);

      const double a11 = 0.5 * (p1.a11(y, x) + p2.a11(ys, xs));
      const double a12 = 0.5 * (p1.a12(y, x) + p2.a12(ys, xs));
      const double a22 = 0.5 * (p1.a22(y, x) + p2.a22(ys, xs));
      const double db1 = -0.5 * (p2.b1(ys, xs) - p1.b1(y, x)) + a11 * dx + a12 * dy;
      const double db2 = -0.5 * (p2.b2(ys, xs) - p1.b2(y, x)) + a12 * dx + a22 * dy;

      // A is symmetric, so A^T A = A^2 and A^T db = A db.
      g11(y, x) = a11 * a11 + a12 * a12;
      g12(y, x) = a12 * (a11 + a22);
      g22(y, x) = a12 * a12 + a22 * a22;
      h1(y, x) = a11 * db1 + a12 * db2;
      h2(y, x) = a12 * db1 + a22 * db2;
    }
  }

  const int half = w / 2;
  const Eigen::ArrayXd k = gaussian_kernel(w, 0.3 * half);
  const auto blur = [&k](const Image& im) { return correlate_cols(correlate_rows(im, k), k); };
  g11 = blur(g11);
  g12 = blur(g12);
  g22 = blur(g22);
  h1 = blur(h1);
  h2 = blur(h2);

  FlowField out{Image(rows, cols), Image(rows, cols), prior.dt, 0.0};
  double det_sum = 0.0;
  long det_count = 0;
  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      const double det = g11(y, x) * g22(y, x) - g12(y, x) * g12(y, x);
      if (y >= half && y < rows - half && x >= half && x < cols - half) {
        det_sum += det;
        ++det_count;
      }
      if (det < 1e-12) {
        out.vx(y, x) = prior.vx(y, x);
        out.vy(y, x) = prior.vy(y, x);
        continue;
      }
      out.vx(y, x) = (g22(y, x) * h1(y, x) - g12(y, x) * h2(y, x)) / det;
      out.vy(y, x) = (g11(y, x) * h2(y, x) - g12(y, x) * h1(y, x)) / det;
    }
  }
  out.texture_strength = det_count > 0 ? det_sum / static_cast<double>(det_count) : 0.0;
  return out;
}

FlowField farneback_flow(const ImageFrame& f1, const ImageFrame& f2, const FlowParams& params) {
  params.validate();
  f1.validate();
  f2.validate();
  require_same_shape(f1.pixels, f2.pixels, "farneback_flow");
  if (!(f2.timestamp > f1.timestamp)) {
    throw InvalidInput("farneback_flow: second frame must be later than the first");
  }

  const Eigen::Index rows0 = f1.pixels.rows(), cols0 = f1.pixels.cols();
  const Eigen::Index min_size = 2 * params.expansion_window + 1;

  // Number of usable levels: stop before a level gets smaller than the expansion support.
  int levels = 1;
  for (int k = 1; k < params.pyramid_levels; ++k) {
    const double s = std::pow(params.pyramid_scale, k);
    if (std::lround(rows0 * s) < min_size || std::lround(cols0 * s) < min_size) break;
    levels = k + 1;
  }

  FlowField flow;
  for (int k = levels - 1; k >= 0; --k) {
    const double s = std::pow(params.pyramid_scale, k);
    Image im1 = f1.pixels, im2 = f2.pixels;
    Eigen::Index rows = rows0, cols = cols0;
    if (k > 0) {
      const double sigma = (1.0 / s - 1.0) * 0.5;
      rows = std::lround(rows0 * s);
      cols = std::lround(cols0 * s);
      im1 = resize_bilinear(gaussian_blur(f1.pixels, sigma), rows, cols);
      im2 = resize_bilinear(gaussian_blur(f2.pixels, sigma), rows, cols);
    }

    FlowField prior;
    prior.dt = f2.timestamp - f1.timestamp;
    if (k == levels - 1) {
      prior.vx = Image::Zero(rows, cols);
      prior.vy = Image::Zero(rows, cols);
    } else {
      const double fx = static_cast<double>(cols) / static_cast<double>(flow.vx.cols());
      const double fy = static_cast<double>(rows) / static_cast<double>(flow.vx.rows());
      prior.vx = resize_bilinear(flow.vx, rows, cols) * fx;
      prior.vy = resize_bilinear(flow.vy, rows, cols) * fy;
    }

    const PolyField p1 = poly_expansion(im1, params.expansion_window, params.expansion_sigma);
    const PolyField p2 = poly_expansion(im2, params.expansion_window, params.expansion_sigma);
    flow = std::move(prior);
    for (int it = 0; it < params.iterations_per_level; ++it) {
      flow = flow_iteration(p1, p2, flow, params.averaging_window);
      const double lim = params.max_displacement;
      const Image scale = (lim / (flow.vx.square() + flow.vy.square()).sqrt()).min(1.0);
      flow.vx *= scale;
      flow.vy *= scale;
    }
  }
  return flow;
}

// --- reduction to a velocity measurement ----------------------------------------

namespace {

// Component-wise interior median of (flow - offset(x, y)), in px per frame.
template <typename Offset>
Vec2d interior_median(const FlowField& field, int border_margin, const char* what, Offset offset) {
  require_same_shape(field.vx, field.vy, what);
  const Eigen::Index rows = field.vx.rows(), cols = field.vx.cols();
  if (border_margin < 0 || 2 * border_margin >= rows || 2 * border_margin >= cols) {
    throw InvalidParameter(std::string(what) + ": border margin leaves an empty interior");
  }
  if (!(field.dt > 0.0)) throw InvalidParameter(std::string(what) + ": flow field has no positive dt");

  std::vector<double> xs, ys;
  xs.reserve(static_cast<std::size_t>(rows * cols));
  ys.reserve(static_cast<std::size_t>(rows * cols));
  for (Eigen::Index y = border_margin; y < rows - border_margin; ++y) {
    for (Eigen::Index x = border_margin; x < cols - border_margin; ++x) {
      const Vec2d o = offset(static_cast<double>(x), static_cast<double>(y));
      xs.push_back(field.vx(y, x) - o.x());
      ys.push_back(field.vy(y, x) - o.y());
    }
  }
  return Vec2d(median_of(std::move(xs)), median_of(std::move(ys)));
}

}  // namespace

Vec2d mean_flow_rate(const FlowField& field, int border_margin) {
  return interior_median(field, border_margin, "mean_flow_rate", [](double, double) { return Vec2d::Zero(); }) /
         field.dt;
}

Vec2d derotated_flow_rate(const FlowField& field, const Vec3d& gyro_rad_s, const CameraIntrinsics& intr,
                          int border_margin) {
  intr.validate();
  if (field.vx.rows() != intr.height || field.vx.cols() != intr.width) {
    throw InvalidParameter("derotated_flow_rate: flow field size does not match the camera");
  }
  const double f = intr.focal_px;
  const Vec3d w = gyro_rad_s * field.dt;
  const auto off_axis = [&](double u, double v) {
    const double x = (u - intr.cx) / f, y = (v - intr.cy) / f;
    return Vec2d(f * (x * y * w.x() - x * x * w.y() + y * w.z()), f * (y * y * w.x() - x * y * w.y() - x * w.z()));
  };
  return interior_median(field, border_margin, "derotated_flow_rate", off_axis) / field.dt;
}

std::optional<Vec2d> flow_to_body_velocity(const Vec2d& rate_px_s, const Vec3d& gyro_rad_s, double h_agl,
                                           const CameraIntrinsics& intr) {
  if (!(h_agl > 0.1)) return std::nullopt;
  const Vec2d angular = rate_px_s / intr.focal_px;
  const Vec2d rotational(-gyro_rad_s.y(), gyro_rad_s.x());
  const Vec2d translational = angular - rotational;
  // Ground features move opposite to the vehicle.
  return Vec2d(-translational * h_agl);
}

}  // namespace ofnav
