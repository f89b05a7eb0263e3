#include <doctest.h>

#include "selfmvs/parallel.hpp"
#include "selfmvs/warping.hpp"
#include "test_util.hpp"

using namespace selfmvs;
using namespace testutil;

namespace {

Image random_image(int h, int w, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  Image img(h, w, c);
  for (auto& ch : img.channels) ch = ch.unaryExpr([&](double) { return u(rng); });
  return img;
}

}  // namespace

TEST_CASE("self-warp is the identity on valid pixels") {
  const Camera cam = simple_camera(20, 24, 32);
  DepthMap depth = DepthMap::Constant(20, 24, 3.0);
  depth(4, 5) = 0.0;
  depth(7, 9) = std::numeric_limits<double>::quiet_NaN();
  const WarpCoords wc = warp_coordinates(depth, cam, cam);
  const Mask valid = depth_validity(depth);
  CHECK((wc.mask == valid).all());
  const Image src = random_image(20, 24, 3, 2);
  const WarpResult wr = warp_image(src, depth, cam, cam, false);
  for (int r = 0; r < 20; ++r) {
    for (int c = 0; c < 24; ++c) {
      if (!valid(r, c)) {
        CHECK(wr.warped[0](r, c) == 0.0);
        continue;
      }
      CHECK(std::abs(wc.x(r, c) - c) < 1e-12);
      CHECK(std::abs(wc.y(r, c) - r) < 1e-12);
    }
  }
  // Exact with dyadic K and depth.
  const Camera dy(make_K(64, 17, 33), Mat4::Identity(), {17, 33}, {1, 10});
  const DepthMap d4 = DepthMap::Constant(17, 33, 4.0);
  const Image s2 = random_image(17, 33, 1, 4);
  const WarpResult w2 = warp_image(s2, d4, dy, dy, false);
  CHECK(w2.mask.all());
  CHECK((w2.warped[0] == s2[0]).all());
}

TEST_CASE("fronto-parallel stereo plane gives constant disparity f*b/d") {
  const double f = 80, b = 0.15, d = 4.0;
  const Camera ref(make_K(f, 32, 40), Mat4::Identity(), {32, 40}, {1, 10});
  const Camera src(make_K(f, 32, 40), pose(Mat3::Identity(), Vec3(-b, 0, 0)), {32, 40}, {1, 10});
  const WarpCoords wc = warp_coordinates(DepthMap::Constant(32, 40, d), ref, src);
  int valid = 0;
  for (int r = 0; r < 32; ++r) {
    for (int c = 0; c < 40; ++c) {
      if (!wc.mask(r, c)) continue;
      ++valid;
      CHECK(std::abs((c - wc.x(r, c)) - f * b / d) < 1e-9);
      CHECK(std::abs(wc.y(r, c) - r) < 1e-9);
    }
  }
  CHECK(valid == 32 * (40 - 3));  // 3 px disparity leaves 3 columns out of bounds
}

TEST_CASE("cheirality and dimension checks") {
  const Camera ref = simple_camera(10, 12, 12);
  // Source camera looking back at the reference: all points behind it.
  Mat3 flip = Eigen::AngleAxisd(M_PI, Vec3::UnitY()).toRotationMatrix();
  const Camera src = simple_camera(10, 12, 12, pose(flip, Vec3(0, 0, 10)));
  const WarpCoords wc = warp_coordinates(DepthMap::Constant(10, 12, 12.0), ref, src);
  CHECK_FALSE(wc.mask.any());
  CHECK((wc.proj_depth < 0).all());
  CHECK_THROWS_AS(warp_coordinates(DepthMap::Constant(9, 12, 2.0), ref, ref), ContractError);
}

TEST_CASE("bilinear sampling basics") {
  const Image img = random_image(9, 11, 1, 3);
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 11; ++c) CHECK(sample_bilinear(img[0], c, r) == img[0](r, c));
  CHECK(sample_bilinear(img[0], -0.01, 3) == 0.0);
  CHECK(sample_bilinear(img[0], 10.01, 3) == 0.0);
  CHECK(sample_bilinear(img[0], 3, 8.5) == 0.0);

  Grid<double> flat = Grid<double>::Constant(9, 11, 0.37);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ux(0, 10), uy(0, 8);
  for (int i = 0; i < 100; ++i) CHECK(sample_bilinear(flat, ux(rng), uy(rng)) == doctest::Approx(0.37).epsilon(1e-15));

  Grid<double> ramp(9, 11);
  for (int c = 0; c < 11; ++c) ramp.col(c).setConstant(c / 10.0);
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 10; ++c)
      CHECK(std::abs(sample_bilinear(ramp, c + 0.5, r) - (c / 10.0 + 0.05)) < 1e-15);
}

TEST_CASE("bilinear derivative matches finite differences") {
  const Image img = random_image(9, 11, 1, 8);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ux(0.05, 9.95), uy(0.05, 7.95);
  for (int i = 0; i < 200; ++i) {
    const double x = ux(rng), y = uy(rng);
    if (std::abs(x - std::round(x)) < 1e-3 || std::abs(y - std::round(y)) < 1e-3) continue;
    double gx = 0, gy = 0;
    sample_bilinear(img[0], x, y, &gx, &gy);
    const double h = 1e-6;
    CHECK(gx == doctest::Approx((sample_bilinear(img[0], x + h, y) - sample_bilinear(img[0], x - h, y)) / (2 * h)).epsilon(1e-6));
    CHECK(gy == doctest::Approx((sample_bilinear(img[0], x, y + h) - sample_bilinear(img[0], x, y - h)) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("warping synthetic views with ground truth reproduces the reference") {
  auto spec = stereo_plane(3, 0.2);
  const auto scene = synthetic::render(spec);
  for (int s = 1; s < 3; ++s) {
    const WarpResult wr =
        warp_image(scene.views[s].image, scene.depths[0], scene.views[0].camera,
                   scene.views[s].camera, false);
    double max_err = 0;
    for (int c = 0; c < 3; ++c)
      for (int r = 0; r < spec.height; ++r)
        for (int x = 0; x < spec.width; ++x)
          if (wr.mask(r, x))
            max_err = std::max(max_err, std::abs(wr.warped[c](r, x) - scene.views[0].image[c](r, x)));
    CHECK(max_err < 0.02);
  }
}

TEST_CASE("d warped / d depth matches central differences") {
  synthetic::SceneSpec spec;
  spec.surface = synthetic::SurfaceKind::kSphere;
  spec.rig.kind = synthetic::RigKind::kLookAt;
  spec.rig.baseline = 0.4;
  const auto scene = synthetic::render(spec);
  const auto& ref = scene.views[0].camera;
  const auto& src = scene.views[2];
  DepthMap depth = scene.depths[0];
  for (auto& v : depth.reshaped()) if (v <= 0) v = 6.0;
  const WarpResult wr = warp_image(src.image, depth, ref, src.camera, true);
  REQUIRE(wr.d_ddepth.has_value());
  const WarpCoords wc = warp_coordinates(depth, ref, src.camera);
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> ur(0, spec.height - 1), uc(0, spec.width - 1);
  int tested = 0;
  double worst = 0;
  while (tested < 1000) {
    const int r = ur(rng), c = uc(rng);
    if (!wr.mask(r, c)) continue;
    const double d = depth(r, c), h = 1e-3 * d;
    // Skip samples whose FD stencil crosses a bilinear cell boundary.
    const double dx = std::abs(wc.dx_ddepth(r, c)) * h, dyv = std::abs(wc.dy_ddepth(r, c)) * h;
    const double fx = wc.x(r, c) - std::floor(wc.x(r, c)), fy = wc.y(r, c) - std::floor(wc.y(r, c));
    if (fx < dx || 1 - fx < dx || fy < dyv || 1 - fy < dyv) continue;
    DepthMap dp = depth, dm = depth;
    dp(r, c) += h;
    dm(r, c) -= h;
    Grid<double> xp(1, 1), yp(1, 1), xm(1, 1), ym(1, 1);
    const Vec3 Pp = backproject(Pixel(c, r), d + h, ref), Pm = backproject(Pixel(c, r), d - h, ref);
    const Projection pp = project(Pp, src.camera), pm = project(Pm, src.camera);
    for (int ch = 0; ch < 3; ++ch) {
      const double fd = (sample_bilinear(src.image[ch], pp.pixel.x(), pp.pixel.y()) -
                         sample_bilinear(src.image[ch], pm.pixel.x(), pm.pixel.y())) /
                        (2 * h);
      const double an = (*wr.d_ddepth)[ch](r, c);
      const double err = std::abs(an - fd) / std::max(std::abs(fd), 1e-3);
      worst = std::max(worst, err);
    }
    ++tested;
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("warping is bit-identical across thread counts") {
  const auto scene = synthetic::render(stereo_plane(2, 0.3));
  set_num_threads(1);
  const WarpResult a = warp_image(scene.views[1].image, scene.depths[0], scene.views[0].camera,
                                  scene.views[1].camera, true);
  set_num_threads(4);
  const WarpResult b = warp_image(scene.views[1].image, scene.depths[0], scene.views[0].camera,
                                  scene.views[1].camera, true);
  set_num_threads(1);
  for (int c = 0; c < 3; ++c) {
    CHECK((a.warped[c] == b.warped[c]).all());
    CHECK(((*a.d_ddepth)[c] == (*b.d_ddepth)[c]).all());
  }
  CHECK((a.mask == b.mask).all());
}
