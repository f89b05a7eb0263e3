#pragma once

#include <optional>

#include "selfmvs/types.hpp"

namespace selfmvs {

// Depth line of an MVSNet camera file: `d_min interval [count d_max]`.
struct DepthRange {
  double min = 0.0;
  double max = 0.0;
  double interval = 0.0;
  std::optional<int> count;
  // True when the file carried an explicit d_max token.
  bool explicit_max = false;

  // Spacing between adjacent depth hypotheses; falls back to the interval
  // field when no count is known.
  double quantization_step() const { return interval; }
};

// Slack on the closed image bounds, in pixels, so that coordinates landing
// on the border up to rounding still count as inside.
inline constexpr double kBoundsTolerance = 1e-9;

// Pinhole camera. Conventions: `world_to_camera` maps world points into the
// camera frame, +z is the viewing direction, depth is camera-frame z, and
// pixel (0,0) is the center of the top-left pixel. Immutable after
// construction.
class Camera {
 public:
  Camera(const Mat3& K, const Mat4& world_to_camera, ImageSize size, DepthRange range);

  const Mat3& K() const { return K_; }
  const Mat3& K_inv() const { return K_inv_; }
  const Mat4& world_to_camera() const { return T_; }
  Mat3 rotation() const { return T_.topLeftCorner<3, 3>(); }
  Vec3 translation() const { return T_.topRightCorner<3, 1>(); }
  Vec3 center() const { return center_; }
  ImageSize image_size() const { return size_; }
  int height() const { return size_.height; }
  int width() const { return size_.width; }
  const DepthRange& depth_range() const { return range_; }

  // Same pose and intrinsics with a different raster size / depth range.
  Camera with_size(ImageSize size) const { return Camera(K_, T_, size, range_); }
  Camera with_depth_range(DepthRange range) const { return Camera(K_, T_, size_, range); }

  // True if (x, y) lies in [0, W-1] x [0, H-1], up to kBoundsTolerance.
  bool in_bounds(double x, double y) const {
    return x >= -kBoundsTolerance && y >= -kBoundsTolerance &&
           x <= width() - 1 + kBoundsTolerance && y <= height() - 1 + kBoundsTolerance;
  }

 private:
  Mat3 K_;
  Mat3 K_inv_;
  Mat4 T_;
  Vec3 center_;
  ImageSize size_;
  DepthRange range_;
};

struct Projection {
  Pixel pixel;
  double depth = 0.0;
};

// Closed-form inverse of an upper-triangular intrinsic matrix.
Mat3 invert_intrinsics(const Mat3& K);

// Closed-form inverse of a rigid transform [R t; 0 1].
Mat4 invert_rigid(const Mat4& T);

Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up);

// World point at camera-frame depth `depth` along the ray through `pix`.
// Throws std::domain_error for non-positive or non-finite depth.
Point3 backproject(const Pixel& pix, double depth, const Camera& cam);

// Perspective projection. The returned depth is camera-frame z and may be
// negative (point behind the camera); callers check. Throws
// std::domain_error when |z| < 1e-12.
Projection project(const Point3& pt, const Camera& cam);

// Rigid transform taking reference-camera-frame points into the source
// camera frame: T_src * T_ref^-1.
Mat4 relative_transform(const Camera& ref, const Camera& src);

template <typename Derived>
Vec3 transform_point(const Mat4& T, const Eigen::MatrixBase<Derived>& p) {
  return T.topLeftCorner<3, 3>() * p + T.topRightCorner<3, 1>();
}

}  // namespace selfmvs
