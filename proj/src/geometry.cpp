#include "selfmvs/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace selfmvs {
namespace {

constexpr double kRigidTol = 1e-9;

}  // namespace

Mat3 invert_intrinsics(const Mat3& K) {
  const double fx = K(0, 0), s = K(0, 1), cx = K(0, 2);
  const double fy = K(1, 1), cy = K(1, 2);
  Mat3 inv = Mat3::Zero();
  inv(0, 0) = 1.0 / fx;
  inv(0, 1) = -s / (fx * fy);
  inv(0, 2) = (s * cy - cx * fy) / (fx * fy);
  inv(1, 1) = 1.0 / fy;
  inv(1, 2) = -cy / fy;
  inv(2, 2) = 1.0;
  return inv;
}

Mat4 invert_rigid(const Mat4& T) {
  Mat4 inv = Mat4::Identity();
  const Mat3 Rt = T.topLeftCorner<3, 3>().transpose();
  inv.topLeftCorner<3, 3>() = Rt;
  inv.topRightCorner<3, 1>() = -Rt * T.topRightCorner<3, 1>();
  return inv;
}

Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(up);
  SELFMVS_CHECK(x.norm() > 1e-12, "look_at: up vector parallel to viewing direction");
  x.normalize();
  // Image y points down, so y = z x x.
  const Vec3 y = z.cross(x);
  Mat4 T = Mat4::Identity();
  T.block<1, 3>(0, 0) = x.transpose();
  T.block<1, 3>(1, 0) = y.transpose();
  T.block<1, 3>(2, 0) = z.transpose();
  T.topRightCorner<3, 1>() = -T.topLeftCorner<3, 3>() * eye;
  return T;
}

Camera::Camera(const Mat3& K, const Mat4& world_to_camera, ImageSize size, DepthRange range)
    : K_(K), T_(world_to_camera), size_(size), range_(range) {
  SELFMVS_CHECK(K_.allFinite() && T_.allFinite(), "camera: non-finite parameters");
  SELFMVS_CHECK(K_(1, 0) == 0.0 && K_(2, 0) == 0.0 && K_(2, 1) == 0.0 && K_(2, 2) == 1.0,
                "camera: K must be upper-triangular with K(2,2) = 1");
  SELFMVS_CHECK(K_(0, 0) > 0.0 && K_(1, 1) > 0.0, "camera: focal lengths must be positive");
  const Mat3 R = T_.topLeftCorner<3, 3>();
  SELFMVS_CHECK((R * R.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() <= kRigidTol,
                "camera: rotation block is not orthonormal");
  SELFMVS_CHECK(std::abs(R.determinant() - 1.0) <= kRigidTol,
                "camera: rotation block must have determinant +1");
  SELFMVS_CHECK(T_.row(3) == Eigen::RowVector4d(0, 0, 0, 1),
                "camera: last extrinsic row must be 0 0 0 1");
  SELFMVS_CHECK(size_.height > 0 && size_.width > 0, "camera: image size must be positive");
  SELFMVS_CHECK(range_.min > 0.0 && range_.min < range_.max,
                "camera: depth range requires 0 < d_min < d_max");
  K_inv_ = invert_intrinsics(K_);
  center_ = -R.transpose() * translation();
}

Point3 backproject(const Pixel& pix, double depth, const Camera& cam) {
  if (!(std::isfinite(depth) && depth > 0.0)) {
    throw std::domain_error("backproject: depth must be positive and finite");
  }
  const Vec3 ray = cam.K_inv() * Vec3(pix.x(), pix.y(), 1.0);
  const Vec3 p_cam = depth * ray;
  return cam.rotation().transpose() * (p_cam - cam.translation());
}

Projection project(const Point3& pt, const Camera& cam) {
  const Vec3 p_cam = transform_point(cam.world_to_camera(), pt);
  if (std::abs(p_cam.z()) < 1e-12) {
    throw std::domain_error("project: point lies in the camera's principal plane");
  }
  const Vec3 h = cam.K() * p_cam;
  return {Pixel(h.x() / h.z(), h.y() / h.z()), p_cam.z()};
}

Mat4 relative_transform(const Camera& ref, const Camera& src) {
  return src.world_to_camera() * invert_rigid(ref.world_to_camera());
}

}  // namespace selfmvs
