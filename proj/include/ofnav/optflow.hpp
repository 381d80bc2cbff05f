#pragma once

// Dense two-frame optical flow by polynomial expansion (Farneback), and the
// reduction of a dense field to a body-frame velocity measurement.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>

#include "ofnav/geom.hpp"

namespace ofnav {

/// Row-major intensity grid; rows index image y, columns index image x.
using Image = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ImageFrame {
  Image pixels;
  double timestamp{0};

  [[nodiscard]] Eigen::Index width() const { return pixels.cols(); }
  [[nodiscard]] Eigen::Index height() const { return pixels.rows(); }

  /// Throws InvalidInput unless the frame is at least 16x16 with finite intensities in [0, 1].
  void validate() const;
};

/// Per-pixel coefficients of f(x) ~ x^T A x + b^T x + c, with x = (column, row) offsets.
struct PolyField {
  Image a11, a12, a22;
  Image b1, b2;
  Image c;
};

/// Displacement in pixels per frame; vx along image columns, vy along rows.
struct FlowField {
  Image vx, vy;
  double dt{0};
  /// Interior mean of det(sum g A^T A) from the last iteration; low values mean little texture.
  double texture_strength{0};
};

struct FlowParams {
  int pyramid_levels{3};
  double pyramid_scale{0.5};
  int iterations_per_level{3};
  int expansion_window{7};
  double expansion_sigma{1.5};
  int averaging_window{15};
  double max_displacement{32.0};

  void validate() const;
};

struct CameraIntrinsics {
  double focal_px{64.0};
  double cx{31.5};
  double cy{31.5};
  int width{64};
  int height{64};

  void validate() const;
};

PolyField poly_expansion(const Image& img, int n, double sigma);

/// One displacement refinement step; `w` is the odd Gaussian averaging window.
FlowField flow_iteration(const PolyField& p1, const PolyField& p2, const FlowField& prior, int w);

FlowField farneback_flow(const ImageFrame& f1, const ImageFrame& f2, const FlowParams& params);

/// Component-wise median flow over the interior, in px/s.
Vec2d mean_flow_rate(const FlowField& field, int border_margin);

/// Like mean_flow_rate, but first removes per pixel the part of the
/// rotation-induced flow that differs from its value at the principal point
/// (pinhole model). The remaining uniform term is what flow_to_body_velocity
/// compensates, so the pair is exact for pure rotation.
Vec2d derotated_flow_rate(const FlowField& field, const Vec3d& gyro_rad_s, const CameraIntrinsics& intr,
                          int border_margin);

/// Pinhole, nadir, body-aligned camera. Returns nullopt when the vehicle is too
/// low for the model (h_agl <= 0.1 m).
std::optional<Vec2d> flow_to_body_velocity(const Vec2d& rate_px_s, const Vec3d& gyro_rad_s, double h_agl,
                                           const CameraIntrinsics& intr);

// --- image helpers shared with the simulator and tests ------------------------

/// Separable correlation with replicate-clamped borders. Kernels have odd length.
Image correlate_rows(const Image& img, const Eigen::ArrayXd& kernel);
Image correlate_cols(const Image& img, const Eigen::ArrayXd& kernel);

Eigen::ArrayXd gaussian_kernel(int size, double sigma);
Image gaussian_blur(const Image& img, double sigma);
Image resize_bilinear(const Image& img, Eigen::Index rows, Eigen::Index cols);

/// Samples `img` at subpixel (x, y) with bilinear interpolation and clamped borders.
double sample_bilinear(const Image& img, double x, double y);

}  // namespace ofnav
