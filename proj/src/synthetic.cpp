#include "selfmvs/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "selfmvs/parallel.hpp"

namespace selfmvs::synthetic {
namespace {

struct Wave {
  Vec3 k;
  double amplitude;
  double phase[3];
};

// Three sinusoids with incommensurate periods; amplitudes sum to 0.4 so
// the texture stays inside [0.1, 0.9] without clipping.
std::vector<Wave> make_waves(const SceneSpec& spec) {
  const double f = spec.focal > 0.0 ? spec.focal : spec.width;
  const double base_period = spec.texture.period_px * spec.target_depth() / f;
  const double ratios[3] = {1.0, 1.3247179572, 1.6180339887};
  const double amps[3] = {0.16, 0.13, 0.11};
  std::mt19937_64 rng(spec.texture.seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::vector<Wave> waves;
  for (int i = 0; i < 3; ++i) {
    const double theta = angle(rng) / 3.0 + i * 2.0 * std::numbers::pi / 3.0;
    const Vec3 dir = Vec3(std::cos(theta), std::sin(theta), 0.35).normalized();
    Wave w;
    w.k = dir * (2.0 * std::numbers::pi / (base_period * ratios[i]));
    w.amplitude = amps[i];
    for (double& p : w.phase) p = angle(rng);
    waves.push_back(w);
  }
  return waves;
}

double texture_from_waves(const std::vector<Wave>& waves, const Point3& p, int ch) {
  double v = 0.5;
  for (const auto& w : waves) v += w.amplitude * std::sin(w.k.dot(p) + w.phase[ch % 3]);
  return std::clamp(v, 0.1, 0.9);
}

std::optional<double> intersect_plane(const Vec3& origin, const Vec3& dir, const Vec3& point,
                                      const Vec3& normal) {
  const double denom = normal.dot(dir);
  if (std::abs(denom) < 1e-15) return std::nullopt;
  const double s = normal.dot(point - origin) / denom;
  if (!(s > 0.0)) return std::nullopt;
  return s;
}

// `dir` has unit camera-frame z, so the ray parameter equals depth.
std::optional<double> intersect(const SceneSpec& spec, const Vec3& origin, const Vec3& dir) {
  switch (spec.surface) {
    case SurfaceKind::kPlane:
      return intersect_plane(origin, dir, Vec3(0, 0, spec.plane_depth), spec.plane_normal);
    case SurfaceKind::kSphere: {
      const Vec3 oc = origin - spec.sphere_center;
      const double a = dir.dot(dir);
      const double b = dir.dot(oc);
      const double c = oc.dot(oc) - spec.sphere_radius * spec.sphere_radius;
      const double disc = b * b - a * c;
      if (disc < 0.0) return std::nullopt;
      const double root = std::sqrt(disc);
      const double s_near = (-b - root) / a;
      if (s_near > 0.0) return s_near;
      const double s_far = (-b + root) / a;
      if (s_far > 0.0) return s_far;
      return std::nullopt;
    }
    case SurfaceKind::kTwoPlaneStep: {
      std::optional<double> best;
      if (auto s = intersect_plane(origin, dir, Vec3(0, 0, spec.near_depth), Vec3(0, 0, 1))) {
        const Vec3 hit = origin + *s * dir;
        if (hit.x() < spec.step_x) best = s;
      }
      if (auto s = intersect_plane(origin, dir, Vec3(0, 0, spec.far_depth), Vec3(0, 0, 1))) {
        if (!best || *s < *best) best = s;
      }
      return best;
    }
  }
  return std::nullopt;
}

Camera make_camera(const SceneSpec& spec, int i) {
  const double f = spec.focal > 0.0 ? spec.focal : spec.width;
  Mat3 K = Mat3::Identity();
  K(0, 0) = f;
  K(1, 1) = f;
  K(0, 2) = 0.5 * (spec.width - 1);
  K(1, 2) = 0.5 * (spec.height - 1);
  Vec3 center = Vec3::Zero();
  if (!spec.rig.centers.empty()) {
    center = spec.rig.centers[i];
  } else if (i > 0) {
    const double a = 2.0 * std::numbers::pi * (i - 1) / (spec.rig.count - 1);
    center = Vec3(spec.rig.baseline * std::cos(a), spec.rig.baseline * std::sin(a), 0.0);
  }
  Mat4 T = Mat4::Identity();
  if (spec.rig.kind == RigKind::kLookAt) {
    T = look_at(center, Vec3(0, 0, spec.target_depth()), Vec3(0, -1, 0));
  } else {
    T.topRightCorner<3, 1>() = -center;
  }
  return Camera(K, T, {spec.height, spec.width}, spec.depth_range);
}

}  // namespace

SurfaceKind parse_surface(const std::string& name) {
  if (name == "plane") return SurfaceKind::kPlane;
  if (name == "sphere") return SurfaceKind::kSphere;
  if (name == "step") return SurfaceKind::kTwoPlaneStep;
  throw ContractError("unknown scene kind '" + name + "' (expected plane, sphere or step)");
}

std::string to_string(SurfaceKind kind) {
  switch (kind) {
    case SurfaceKind::kPlane: return "plane";
    case SurfaceKind::kSphere: return "sphere";
    case SurfaceKind::kTwoPlaneStep: return "step";
  }
  return "?";
}

void SceneSpec::validate() const {
  SELFMVS_CHECK(height >= 16 && width >= 16, "scene: resolution must be at least 16x16");
  SELFMVS_CHECK(rig.count >= 2, "scene: at least two cameras required");
  SELFMVS_CHECK(rig.centers.empty() || static_cast<int>(rig.centers.size()) == rig.count,
                "scene: explicit camera centers must match the camera count");
  SELFMVS_CHECK(texture.channels == 1 || texture.channels == 3,
                "scene: texture must have 1 or 3 channels");
  SELFMVS_CHECK(texture.period_px > 0.0, "scene: texture period must be positive");
  SELFMVS_CHECK(noise_sigma >= 0.0, "scene: noise sigma must be >= 0");
  SELFMVS_CHECK(anchor_stride >= 1, "scene: anchor stride must be >= 1");
  SELFMVS_CHECK(plane_normal.norm() > 0.0, "scene: plane normal must be non-zero");
  SELFMVS_CHECK(sphere_radius > 0.0, "scene: sphere radius must be positive");
  SELFMVS_CHECK(near_depth < far_depth, "scene: step requires near_depth < far_depth");
}

double SceneSpec::target_depth() const {
  switch (surface) {
    case SurfaceKind::kPlane: return plane_depth;
    case SurfaceKind::kSphere: return sphere_center.z() - sphere_radius;
    case SurfaceKind::kTwoPlaneStep: return far_depth;
  }
  return plane_depth;
}

std::vector<Camera> Scene::cameras() const {
  std::vector<Camera> cams;
  for (const auto& v : views) cams.push_back(v.camera);
  return cams;
}

double texture_at(const SceneSpec& spec, const Point3& p, int ch) {
  return texture_from_waves(make_waves(spec), p, ch);
}

std::optional<double> ray_depth(const SceneSpec& spec, const Camera& cam, const Pixel& pix) {
  const Vec3 dir = cam.rotation().transpose() * (cam.K_inv() * Vec3(pix.x(), pix.y(), 1.0));
  return intersect(spec, cam.center(), dir);
}

Scene render(const SceneSpec& spec) {
  spec.validate();
  const auto waves = make_waves(spec);
  const int H = spec.height;
  const int W = spec.width;
  const int C = spec.texture.channels;
  Scene scene;
  for (int i = 0; i < spec.rig.count; ++i) {
    const Camera cam = make_camera(spec, i);
    Image img(H, W, C);
    DepthMap depth = DepthMap::Zero(H, W);
    const Mat3 ray_to_world = cam.rotation().transpose() * cam.K_inv();
    parallel_rows(H, [&](int r) {
      for (int c = 0; c < W; ++c) {
        const Vec3 dir = ray_to_world * Vec3(c, r, 1.0);
        const auto s = intersect(spec, cam.center(), dir);
        if (!s) continue;
        depth(r, c) = *s;
        const Point3 hit = cam.center() + *s * dir;
        for (int ch = 0; ch < C; ++ch) img[ch](r, c) = texture_from_waves(waves, hit, ch);
      }
    });
    const Mask valid = depth_validity(depth);
    SELFMVS_CHECK(valid.any(), "scene: camera " + std::to_string(i) + " sees no surface");
    const double lo = valid.select(depth, std::numeric_limits<double>::infinity()).minCoeff();
    const double hi = valid.select(depth, 0.0).maxCoeff();
    SELFMVS_CHECK(lo >= spec.depth_range.min && hi <= spec.depth_range.max,
                  "scene: camera " + std::to_string(i) + " sees depths [" + std::to_string(lo) +
                      ", " + std::to_string(hi) + "] outside the depth range");
    if (spec.noise_sigma > 0.0) {
      std::mt19937_64 rng(spec.noise_seed + 7919 * static_cast<std::uint64_t>(i));
      std::normal_distribution<double> noise(0.0, spec.noise_sigma);
      for (auto& ch : img.channels) {
        for (Eigen::Index k = 0; k < ch.size(); ++k) {
          ch.data()[k] = std::clamp(ch.data()[k] + noise(rng), 0.0, 1.0);
        }
      }
    }
    scene.views.push_back({std::move(img), cam});
    scene.depths.push_back(std::move(depth));
  }

  // Stratified anchors: every `anchor_stride`-th pixel of every view, lifted
  // with ground truth and tested for visibility in all views.
  const int n = spec.rig.count;
  for (int i = 0; i < n; ++i) {
    const Camera& cam = scene.views[i].camera;
    for (int r = spec.anchor_stride / 2; r < H; r += spec.anchor_stride) {
      for (int c = spec.anchor_stride / 2; c < W; c += spec.anchor_stride) {
        const double d = scene.depths[i](r, c);
        if (!is_valid_depth(d)) continue;
        Anchor a;
        a.position = backproject(Pixel(c, r), d, cam);
        a.visible.assign(n, false);
        for (int j = 0; j < n; ++j) {
          const Camera& other = scene.views[j].camera;
          const Vec3 p = transform_point(other.world_to_camera(), a.position);
          if (!(p.z() > 1e-9)) continue;
          const Projection pr = project(a.position, other);
          if (!other.in_bounds(pr.pixel.x(), pr.pixel.y())) continue;
          const auto seen = ray_depth(spec, other, pr.pixel);
          a.visible[j] = seen && std::abs(*seen - pr.depth) <= 1e-6 * pr.depth;
        }
        scene.anchors.push_back(std::move(a));
      }
    }
  }
  return scene;
}

DepthMap perturb_depth(const DepthMap& depth, double rel, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-rel, rel);
  DepthMap out = depth;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      const double f = 1.0 + u(rng);
      if (is_valid_depth(out(r, c))) out(r, c) *= f;
    }
  }
  return out;
}

View crop_view(const View& view, int row0, int col0, int height, int width) {
  SELFMVS_CHECK(row0 >= 0 && col0 >= 0 && row0 + height <= view.image.height() &&
                    col0 + width <= view.image.width() && height > 0 && width > 0,
                "crop_view: window outside the image");
  Image img(height, width, view.image.num_channels());
  for (int ch = 0; ch < img.num_channels(); ++ch) {
    img[ch] = view.image[ch].block(row0, col0, height, width);
  }
  Mat3 K = view.camera.K();
  K(0, 2) -= col0;
  K(1, 2) -= row0;
  return {std::move(img), Camera(K, view.camera.world_to_camera(), {height, width},
                                 view.camera.depth_range())};
}

DepthMap crop_depth(const DepthMap& depth, int row0, int col0, int height, int width) {
  return depth.block(row0, col0, height, width);
}

}  // namespace selfmvs::synthetic
