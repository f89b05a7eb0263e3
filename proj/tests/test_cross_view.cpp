#include <doctest.h>

#include <atomic>
#include <thread>

#include "selfmvs/cross_view.hpp"
#include "test_util.hpp"

using namespace selfmvs;
using namespace testutil;

namespace {

struct GalleryScene {
  synthetic::Scene scene;
  DepthGallery gallery;
  std::vector<Camera> cams;
  std::vector<int> sources;
};

// Pure-x rig with integer disparities (f*b/d = 4 px per step).
GalleryScene make_gallery(int views = 5) {
  auto spec = stereo_plane(views, 0.2);
  GalleryScene g{synthetic::render(spec), {}, {}, {}};
  g.cams = g.scene.cameras();
  for (int i = 0; i < views; ++i) {
    g.gallery.update(i, g.scene.depths[i], ConfidenceMap::Ones(spec.height, spec.width));
    if (i > 0) g.sources.push_back(i);
  }
  return g;
}

}  // namespace

TEST_CASE("self-check is exactly zero") {
  const Camera cam(make_K(64, 12, 16), Mat4::Identity(), {12, 16}, {1, 10});
  const DepthMap d = DepthMap::Constant(12, 16, 4.0);
  const ReprojectionErrors e = reprojection_errors(d, d, cam, cam);
  CHECK(e.defined.all());
  CHECK((e.e_pixel == 0).all());
  CHECK((e.e_depth == 0).all());
}

TEST_CASE("ground-truth consistent source gives near-zero errors") {
  const GalleryScene g = make_gallery(3);
  for (int s : {1, 2}) {
    const ReprojectionErrors e =
        reprojection_errors(g.scene.depths[0], g.scene.depths[s], g.cams[0], g.cams[s]);
    int defined = 0;
    for (int r = 0; r < e.defined.rows(); ++r)
      for (int c = 0; c < e.defined.cols(); ++c) {
        if (!e.defined(r, c)) continue;
        ++defined;
        CHECK(e.e_pixel(r, c) < 1e-3);
        CHECK(e.e_depth(r, c) < 1e-6);
      }
    CHECK(defined == 64 * (80 - 4 * s));
  }
}

TEST_CASE("scaled reference depth violates tau3") {
  const GalleryScene g = make_gallery(2);
  const DepthMap scaled = g.scene.depths[0] * 1.05;
  const ReprojectionErrors e = reprojection_errors(scaled, g.scene.depths[1], g.cams[0], g.cams[1]);
  int defined = 0;
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 80; ++c) {
      if (!e.defined(r, c)) continue;
      ++defined;
      CHECK(e.e_depth(r, c) > 0.01);
      CHECK(e.e_depth(r, c) == doctest::Approx(0.05 / 1.05).epsilon(0.05));
    }
  CHECK(defined > 0);
}

TEST_CASE("quality mask matches the visibility-count oracle") {
  GalleryScene g = make_gallery(5);
  CheckConfig cfg;
  cfg.n_sources = 4;
  for (int tau4 = 1; tau4 <= 4; ++tau4) {
    cfg.tau4 = tau4;
    const QualityMask q = quality_mask(0, g.gallery, g.cams, g.sources, cfg);
    for (int r = 0; r < 64; ++r)
      for (int c = 0; c < 80; ++c) {
        int visible = 0;
        for (int s : g.sources) {
          const Projection p = project(backproject(Pixel(c, r), g.scene.depths[0](r, c), g.cams[0]), g.cams[s]);
          visible += g.cams[s].in_bounds(p.pixel.x(), p.pixel.y());
        }
        CHECK(q.mask(r, c) == (visible >= tau4));
        CHECK(q.pass_counts(r, c) == visible);
      }
  }
  // Confidence gate.
  g.gallery.update(0, g.scene.depths[0], ConfidenceMap::Zero(64, 80));
  cfg.tau4 = 1;
  CHECK_FALSE(quality_mask(0, g.gallery, g.cams, g.sources, cfg).mask.any());
  g.gallery.update(0, g.scene.depths[0], ConfidenceMap::Constant(64, 80, 0.5));
  CHECK_FALSE(quality_mask(0, g.gallery, g.cams, g.sources, cfg).mask.any());
}

TEST_CASE("hand-built 2x2 threshold boundary") {
  const Camera cam(make_K(4, 2, 2), Mat4::Identity(), {2, 2}, {1, 10});
  const DepthMap d = DepthMap::Constant(2, 2, 2.0);
  DepthGallery gallery;
  gallery.update(0, d, ConfidenceMap::Ones(2, 2));
  // Views 1 and 2 agree with the reference; view 3 disagrees by 10 %.
  gallery.update(1, d, ConfidenceMap::Ones(2, 2));
  gallery.update(2, d, ConfidenceMap::Ones(2, 2));
  gallery.update(3, d * 1.1, ConfidenceMap::Ones(2, 2));
  const std::vector<Camera> cams(4, cam);
  const std::vector<int> sources{1, 2, 3};
  CheckConfig cfg;
  cfg.n_sources = 3;
  cfg.tau4 = 3;  // tau4 - 1 = 2 passing views
  CHECK_FALSE(quality_mask(0, gallery, cams, sources, cfg).mask.any());
  cfg.tau4 = 2;  // exactly tau4 passing
  const QualityMask q = quality_mask(0, gallery, cams, sources, cfg);
  CHECK(q.mask.all());
  CHECK((q.pass_counts == 2).all());
  CHECK(q.average() == 1.0);
}

TEST_CASE("quality mask monotone in thresholds and sensitive to perturbation") {
  GalleryScene g = make_gallery(5);
  g.gallery.update(0, synthetic::perturb_depth(g.scene.depths[0], 0.012, 3), ConfidenceMap::Ones(64, 80));
  CheckConfig base;
  base.n_sources = 4;
  base.tau4 = 3;
  const Mask m0 = quality_mask(0, g.gallery, g.cams, g.sources, base).mask;
  CHECK(m0.any());
  CHECK_FALSE(m0.all());
  for (auto mod : {0, 1, 2}) {
    CheckConfig looser = base;
    if (mod == 0) looser.tau2 = 1.0;
    if (mod == 1) looser.tau3 = 0.02;
    if (mod == 2) looser.tau4 = 2;
    const Mask m1 = quality_mask(0, g.gallery, g.cams, g.sources, looser).mask;
    CHECK((m1 || !m0).all());  // m0 implies m1
  }
  // Noise well above tau3 everywhere drives avg(M) to ~0.
  GalleryScene h = make_gallery(5);
  DepthMap noisy = h.scene.depths[0];
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.03, 0.06);
  std::bernoulli_distribution sign(0.5);
  for (auto& v : noisy.reshaped()) v *= 1 + (sign(rng) ? 1 : -1) * u(rng);
  h.gallery.update(0, noisy, ConfidenceMap::Ones(64, 80));
  base.tau4 = 1;
  CHECK(quality_mask(0, h.gallery, h.cams, h.sources, base).average() < 0.01);
}

TEST_CASE("quality mask contract errors") {
  GalleryScene g = make_gallery(3);
  CheckConfig cfg;
  cfg.tau4 = 3;  // more than the 2 supplied sources
  CHECK_THROWS_AS(quality_mask(0, g.gallery, g.cams, g.sources, cfg), ContractError);
  DepthGallery partial;
  partial.update(0, g.scene.depths[0], ConfidenceMap::Ones(64, 80));
  cfg.tau4 = 1;
  try {
    quality_mask(0, partial, g.cams, g.sources, cfg);
    FAIL("expected ContractError");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("view 1") != std::string::npos);
  }
  cfg.tau2 = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
}

TEST_CASE("gallery versions and snapshots") {
  DepthGallery g;
  CHECK_FALSE(g.contains(2));
  const std::uint64_t v1 = gallery_update(g, 2, DepthMap::Constant(3, 3, 1.0), ConfidenceMap::Ones(3, 3));
  const auto old = g.get(2);
  const std::uint64_t v2 = gallery_update(g, 2, DepthMap::Constant(3, 3, 2.0), ConfidenceMap::Ones(3, 3));
  const std::uint64_t v3 = gallery_update(g, 2, DepthMap::Constant(3, 3, 3.0), ConfidenceMap::Ones(3, 3));
  CHECK(v3 == v1 + 2);
  CHECK(v2 == v1 + 1);
  CHECK(g.get(2)->depth(0, 0) == 3.0);
  CHECK(old->depth(0, 0) == 1.0);  // snapshot unaffected
  CHECK(g.views() == std::vector<int>{2});
  CHECK_THROWS_AS(g.update(1, DepthMap::Ones(2, 2), ConfidenceMap::Ones(3, 3)), ContractError);
  CHECK_THROWS_AS(g.update(1, DepthMap::Ones(2, 2), ConfidenceMap::Constant(2, 2, 1.5)), ContractError);
}

TEST_CASE("concurrent readers never see torn entries") {
  DepthGallery g;
  g.update(0, DepthMap::Constant(32, 32, 1.0), ConfidenceMap::Constant(32, 32, 1.0 / 1024));
  std::atomic<bool> stop{false};
  std::atomic<int> torn{0}, reads{0};
  std::vector<std::jthread> readers;
  for (int t = 0; t < 4; ++t) {
    readers.emplace_back([&] {
      while (!stop) {
        const auto e = g.get(0);
        const double v = e->depth(0, 0);
        const bool ok = (e->depth == v).all() && (e->confidence == v / 1024).all() &&
                        static_cast<double>(e->version) == v;
        if (!ok) ++torn;
        ++reads;
      }
    });
  }
  for (int v = 2; v <= 1000; ++v)
    g.update(0, DepthMap::Constant(32, 32, v), ConfidenceMap::Constant(32, 32, v / 1024.0));
  stop = true;
  readers.clear();
  CHECK(torn == 0);
  CHECK(reads > 0);
  CHECK(g.get(0)->version == 1000);
}
