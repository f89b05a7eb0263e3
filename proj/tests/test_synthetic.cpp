#include <doctest.h>

#include "selfmvs/warping.hpp"
#include "test_util.hpp"

using namespace selfmvs;
using namespace testutil;

TEST_CASE("fronto-parallel plane renders a constant depth") {
  synthetic::SceneSpec spec;
  const auto scene = synthetic::render(spec);
  REQUIRE(scene.views.size() == 5);
  for (const auto& d : scene.depths) CHECK((d == 4.0).all());
  for (const auto& v : scene.views) {
    validate_image(v.image);
    CHECK(v.image.num_channels() == 3);
    for (const auto& ch : v.image.channels) {
      CHECK(ch.minCoeff() >= 0.1);
      CHECK(ch.maxCoeff() <= 0.9);
    }
  }
}

TEST_CASE("pure-x baseline gives disparity f*b/d") {
  const auto spec = stereo_plane(2, 0.25);
  const auto scene = synthetic::render(spec);
  const double f = scene.views[0].camera.K()(0, 0);
  const WarpCoords wc = warp_coordinates(scene.depths[0], scene.views[0].camera, scene.views[1].camera);
  for (int r = 0; r < spec.height; ++r)
    for (int c = 0; c < spec.width; ++c)
      if (wc.mask(r, c)) CHECK(std::abs(c - wc.x(r, c) - f * 0.25 / 4.0) < 1e-9);
}

TEST_CASE("sphere depth equals the quadratic root; misses are holes") {
  synthetic::SceneSpec spec;
  spec.surface = synthetic::SurfaceKind::kSphere;
  spec.rig.kind = synthetic::RigKind::kLookAt;
  const auto scene = synthetic::render(spec);
  int hits = 0, misses = 0;
  for (std::size_t i = 0; i < scene.views.size(); ++i) {
    const Camera& cam = scene.views[i].camera;
    for (int r = 0; r < spec.height; ++r)
      for (int c = 0; c < spec.width; ++c) {
        // Camera-frame ray with unit z; solve |o + t v - C|^2 = R^2 in world frame.
        const Vec3 v = cam.rotation().transpose() * (cam.K_inv() * Vec3(c, r, 1));
        const Vec3 oc = cam.center() - spec.sphere_center;
        const double A = v.squaredNorm(), B = 2 * v.dot(oc), Cc = oc.squaredNorm() - spec.sphere_radius * spec.sphere_radius;
        const double disc = B * B - 4 * A * Cc;
        const double d = scene.depths[i](r, c);
        if (disc < 0) {
          CHECK(d == 0.0);
          ++misses;
          continue;
        }
        const double t = (-B - std::sqrt(disc)) / (2 * A);
        CHECK(std::abs(d - t) <= 1e-9 * t);
        ++hits;
      }
  }
  CHECK(hits > 0);
  CHECK(misses > 0);
}

TEST_CASE("two-plane step has exact occlusion") {
  synthetic::SceneSpec spec;
  spec.surface = synthetic::SurfaceKind::kTwoPlaneStep;
  const auto scene = synthetic::render(spec);
  const Camera& cam = scene.views[0].camera;
  for (int r = 0; r < spec.height; ++r)
    for (int c = 0; c < spec.width; ++c) {
      const double x_near = backproject(Pixel(c, r), spec.near_depth, cam).x();
      const double expected = x_near < spec.step_x ? spec.near_depth : spec.far_depth;
      CHECK(scene.depths[0](r, c) == doctest::Approx(expected).epsilon(1e-12));
    }
  // Some anchors are hidden from some view by the foreground.
  int hidden = 0;
  for (const auto& a : scene.anchors)
    for (bool v : a.visible) hidden += !v;
  CHECK(hidden > 0);
}

TEST_CASE("photo-consistency across views on co-visible pixels") {
  synthetic::SceneSpec spec;
  spec.surface = synthetic::SurfaceKind::kSphere;
  spec.rig.kind = synthetic::RigKind::kLookAt;
  spec.rig.baseline = 0.3;
  const auto scene = synthetic::render(spec);
  for (int s = 1; s < 5; ++s) {
    const WarpResult wr = warp_image(scene.views[s].image, scene.depths[0], scene.views[0].camera,
                                     scene.views[s].camera, false);
    const WarpCoords wc = warp_coordinates(scene.depths[0], scene.views[0].camera, scene.views[s].camera);
    double worst = 0;
    for (int r = 0; r < spec.height; ++r)
      for (int c = 0; c < spec.width; ++c) {
        if (!wr.mask(r, c)) continue;
        // Co-visible: the source sees the same surface point at all four bilinear corners.
        bool covis = true;
        for (int dy = 0; dy <= 1 && covis; ++dy)
          for (int dx = 0; dx <= 1 && covis; ++dx) {
            const int rr = std::min(static_cast<int>(wc.y(r, c)) + dy, spec.height - 1);
            const int cc = std::min(static_cast<int>(wc.x(r, c)) + dx, spec.width - 1);
            covis = std::abs(scene.depths[s](rr, cc) - wc.proj_depth(r, c)) < 0.1;
          }
        if (!covis) continue;
        // Skip grazing views of the sphere, where the texture is no longer band-limited.
        const Point3 P = backproject(Pixel(c, r), scene.depths[0](r, c), scene.views[0].camera);
        const Vec3 nrm = (P - spec.sphere_center).normalized();
        const double cos0 = nrm.dot((scene.views[0].camera.center() - P).normalized());
        const double cos1 = nrm.dot((scene.views[s].camera.center() - P).normalized());
        if (std::min(cos0, cos1) < 0.5) continue;
        for (int ch = 0; ch < 3; ++ch)
          worst = std::max(worst, std::abs(wr.warped[ch](r, c) - scene.views[0].image[ch](r, c)));
      }
    CHECK(worst < 0.02);
  }
}

TEST_CASE("determinism, noise, validation") {
  synthetic::SceneSpec spec;
  spec.noise_sigma = 0.01;
  const auto a = synthetic::render(spec), b = synthetic::render(spec);
  for (int i = 0; i < 5; ++i) CHECK((a.views[i].image[1] == b.views[i].image[1]).all());
  spec.noise_seed = 99;
  const auto c = synthetic::render(spec);
  CHECK_FALSE((a.views[0].image[0] == c.views[0].image[0]).all());

  synthetic::SceneSpec bad;
  bad.height = 8;
  CHECK_THROWS_AS(synthetic::render(bad), ContractError);
  bad = {};
  bad.rig.count = 1;
  CHECK_THROWS_AS(synthetic::render(bad), ContractError);
  bad = {};
  bad.plane_depth = 40;  // outside the depth range
  CHECK_THROWS_AS(synthetic::render(bad), ContractError);
  bad = {};
  bad.surface = synthetic::SurfaceKind::kSphere;
  bad.sphere_center = Vec3(0, 0, -5);  // behind every camera
  CHECK_THROWS_AS(synthetic::render(bad), ContractError);
  CHECK_THROWS_AS(synthetic::parse_surface("cube"), ContractError);
  CHECK(synthetic::parse_surface("step") == synthetic::SurfaceKind::kTwoPlaneStep);
}

TEST_CASE("perturb and crop helpers") {
  const DepthMap d = DepthMap::Constant(20, 30, 2.0);
  const DepthMap p = synthetic::perturb_depth(d, 0.05, 3);
  CHECK(((p - d).abs() <= 0.1 + 1e-15).all());
  CHECK((p != d).any());
  CHECK((synthetic::perturb_depth(d, 0.05, 3) == p).all());

  const auto scene = synthetic::render(synthetic::SceneSpec{});
  const View crop = synthetic::crop_view(scene.views[1], 10, 20, 16, 24);
  CHECK(crop.image.height() == 16);
  CHECK(crop.camera.width() == 24);
  // A world point projects to the same place minus the offset.
  const Point3 P = backproject(Pixel(30, 15), 4.0, scene.views[1].camera);
  const Projection pc = project(P, crop.camera);
  CHECK(pc.pixel.x() == doctest::Approx(10));
  CHECK(pc.pixel.y() == doctest::Approx(5));
  CHECK(crop.image[2](5, 10) == scene.views[1].image[2](15, 30));
  CHECK(synthetic::crop_depth(scene.depths[1], 10, 20, 16, 24).rows() == 16);
}
