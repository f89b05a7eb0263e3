#include <doctest.h>

#include "test_util.hpp"

using namespace selfmvs;
using namespace testutil;

TEST_CASE("camera validates its invariants") {
  const Mat3 K = make_K(50, 10, 10);
  CHECK_NOTHROW(Camera(K, Mat4::Identity(), {10, 10}, {1, 2}));
  Mat4 bad = Mat4::Identity();
  bad(0, 0) = -1;  // det -1
  CHECK_THROWS_AS(Camera(K, bad, {10, 10}, {1, 2}), ContractError);
  bad = Mat4::Identity();
  bad(0, 1) = 1e-6;
  CHECK_THROWS_AS(Camera(K, bad, {10, 10}, {1, 2}), ContractError);
  Mat3 Kb = K;
  Kb(1, 0) = 0.5;
  CHECK_THROWS_AS(Camera(Kb, Mat4::Identity(), {10, 10}, {1, 2}), ContractError);
  Kb = K;
  Kb(0, 0) = -50;
  CHECK_THROWS_AS(Camera(Kb, Mat4::Identity(), {10, 10}, {1, 2}), ContractError);
  CHECK_THROWS_AS(Camera(K, Mat4::Identity(), {10, 10}, {2, 1}), ContractError);
  CHECK_THROWS_AS(Camera(K, Mat4::Identity(), {10, 10}, {0, 1}), ContractError);
  CHECK_THROWS_AS(Camera(K, Mat4::Identity(), {0, 10}, {1, 2}), ContractError);
}

TEST_CASE("principal point backprojects onto the optical axis") {
  const Camera cam = simple_camera();
  const Point3 p = backproject(Pixel(cam.K()(0, 2), cam.K()(1, 2)), 3.5, cam);
  CHECK(p.x() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(p.y() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(p.z() == 3.5);
  const Projection pr = project(Point3(0, 0, 3.5), cam);
  CHECK(pr.pixel.x() == cam.K()(0, 2));
  CHECK(pr.pixel.y() == cam.K()(1, 2));
  CHECK(pr.depth == 3.5);
}

TEST_CASE("backproject rejects bad depth, project reports points behind the camera") {
  const Camera cam = simple_camera();
  CHECK_THROWS_AS(backproject(Pixel(3, 3), 0.0, cam), std::domain_error);
  CHECK_THROWS_AS(backproject(Pixel(3, 3), -1.0, cam), std::domain_error);
  CHECK_THROWS_AS(backproject(Pixel(3, 3), std::nan(""), cam), std::domain_error);
  const Projection pr = project(Point3(0.2, 0.1, -2.0), cam);
  CHECK(pr.depth == -2.0);
  CHECK_THROWS_AS(project(Point3(1, 1, 0.0), cam), std::domain_error);
}

TEST_CASE("backproject and project agree with independent homogeneous oracles") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ux(0, 63), uy(0, 47), ud(0.5, 20);
  for (int trial = 0; trial < 200; ++trial) {
    const Camera cam = random_camera(rng);
    const Pixel pix(ux(rng), uy(rng));
    const double d = ud(rng);
    // Solve [K 0] T X = d (x, y, 1) for the world point via a 4x4 system.
    Eigen::Matrix4d A = Eigen::Matrix4d::Zero();
    A.topRows<3>() = cam.K() * cam.world_to_camera().topRows<3>();
    A(3, 3) = 1.0;
    const Eigen::Vector4d rhs(d * pix.x(), d * pix.y(), d, 1.0);
    const Eigen::Vector4d X = A.fullPivLu().solve(rhs);
    const Point3 P = backproject(pix, d, cam);
    CHECK((P - X.head<3>()).norm() < 1e-9 * (1 + X.head<3>().norm()));

    // Project: multiply then divide.
    const Eigen::Vector4d Xh(P.x(), P.y(), P.z(), 1.0);
    const Eigen::Vector3d h = cam.K() * (cam.world_to_camera() * Xh).head<3>();
    const Projection pr = project(P, cam);
    CHECK(std::abs(pr.pixel.x() - h.x() / h.z()) < 1e-12 * (1 + std::abs(pr.pixel.x())));
    CHECK(std::abs(pr.pixel.y() - h.y() / h.z()) < 1e-12 * (1 + std::abs(pr.pixel.y())));
    CHECK(std::abs(pr.depth - d) < 1e-9 * d);
  }
}

TEST_CASE("relative transform: identity, translation, two-path and composition") {
  std::mt19937_64 rng(5);
  const Camera a = random_camera(rng), b = random_camera(rng), c = random_camera(rng);
  CHECK((relative_transform(a, a) - Mat4::Identity()).cwiseAbs().maxCoeff() < 1e-12);

  const Camera t1 = simple_camera(48, 64, 64, pose(Mat3::Identity(), Vec3(0.1, 0, 0)));
  const Camera t2 = simple_camera(48, 64, 64, pose(Mat3::Identity(), Vec3(-0.3, 0.2, 1)));
  const Mat4 rt = relative_transform(t1, t2);
  CHECK((rt.topLeftCorner<3, 3>() - Mat3::Identity()).norm() < 1e-15);
  CHECK((rt.topRightCorner<3, 1>() - Vec3(-0.4, 0.2, 1)).norm() < 1e-15);

  std::uniform_real_distribution<double> ux(0, 63), uy(0, 47), ud(0.5, 20);
  const Mat4 ab = relative_transform(a, b);
  for (int i = 0; i < 100; ++i) {
    const Pixel pix(ux(rng), uy(rng));
    const double d = ud(rng);
    const Vec3 p_ref = d * (a.K_inv() * Vec3(pix.x(), pix.y(), 1.0));
    const Vec3 via_world = transform_point(b.world_to_camera(), backproject(pix, d, a));
    CHECK((transform_point(ab, p_ref) - via_world).norm() < 1e-9 * (1 + via_world.norm()));
  }
  const Mat4 composed = relative_transform(b, c) * relative_transform(a, b);
  CHECK((composed - relative_transform(a, c)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("round trip and scale covariance") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ux(0, 63), uy(0, 47), ud(0.5, 20);
  for (int i = 0; i < 2000; ++i) {
    const Camera cam = random_camera(rng);
    const Pixel pix(ux(rng), uy(rng));
    const double d = ud(rng);
    const Projection pr = project(backproject(pix, d, cam), cam);
    CHECK(std::abs(pr.depth - d) / d < 1e-9);
    CHECK((pr.pixel - pix).norm() / pix.norm() < 1e-9);

    // Scaling translation and depth by s keeps pixels and scales depth.
    const double s = 2.5;
    const Camera scaled(cam.K(), pose(cam.rotation(), s * cam.translation()), cam.image_size(),
                        cam.depth_range());
    const Projection ps = project(s * backproject(pix, d, cam), scaled);
    CHECK(std::abs(ps.depth - s * d) / (s * d) < 1e-9);
    CHECK((ps.pixel - pix).norm() < 1e-8);
  }
}

TEST_CASE("look_at aims +z at the target") {
  const Vec3 eye(1, 0.5, -2), target(0, 0, 4);
  const Camera cam = simple_camera(48, 64, 64, look_at(eye, target, Vec3(0, -1, 0)));
  CHECK((cam.center() - eye).norm() < 1e-12);
  const Projection pr = project(target, cam);
  CHECK(pr.pixel.x() == doctest::Approx(cam.K()(0, 2)));
  CHECK(pr.pixel.y() == doctest::Approx(cam.K()(1, 2)));
  CHECK(pr.depth == doctest::Approx((target - eye).norm()));
}

TEST_CASE("intrinsics inverse is exact enough") {
  std::mt19937_64 rng(3);
  const Camera cam = random_camera(rng);
  CHECK((cam.K() * cam.K_inv() - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((invert_rigid(cam.world_to_camera()) * cam.world_to_camera() - Mat4::Identity())
            .cwiseAbs()
            .maxCoeff() < 1e-14);
}
