#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "selfmvs/geometry.hpp"
#include "selfmvs/losses.hpp"
#include "selfmvs/view_selection.hpp"

namespace selfmvs::synthetic {

enum class SurfaceKind { kPlane, kSphere, kTwoPlaneStep };
enum class RigKind {
  kTranslate,  // identity rotations, centers on a ring in the z = 0 plane
  kLookAt,     // centers on the same ring, every camera aimed at the target
};

SurfaceKind parse_surface(const std::string& name);
std::string to_string(SurfaceKind kind);

struct TextureSpec {
  std::uint64_t seed = 7;
  // Base period of the three sinusoids measured in reference-view pixels at
  // the target distance.
  double period_px = 14.0;
  int channels = 3;
};

struct RigSpec {
  int count = 5;
  RigKind kind = RigKind::kTranslate;
  // Ring radius; view 0 sits at the origin, views 1..n-1 on the ring.
  double baseline = 0.2;
  // Optional explicit camera centers (overrides the ring).
  std::vector<Vec3> centers;
};

struct SceneSpec {
  SurfaceKind surface = SurfaceKind::kPlane;
  // Plane: passes through (0, 0, plane_depth) with normal `plane_normal`.
  double plane_depth = 4.0;
  Vec3 plane_normal = Vec3(0, 0, 1);
  // Sphere.
  Vec3 sphere_center = Vec3(0, 0, 4.0);
  double sphere_radius = 1.5;
  // Two-plane step: background at far_depth everywhere, foreground at
  // near_depth for world x < step_x.
  double near_depth = 3.0;
  double far_depth = 4.5;
  double step_x = 0.0;

  TextureSpec texture;
  RigSpec rig;
  int height = 64;
  int width = 80;
  // Focal length in pixels; 0 selects width.
  double focal = 0.0;
  DepthRange depth_range{1.0, 10.0, 9.0 / 191.0, 192, true};
  // Optional additive Gaussian image noise.
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 1;
  int anchor_stride = 4;

  void validate() const;
  // Distance along +z from view 0 to the surface, used for texture scale
  // and look-at targets.
  double target_depth() const;
};

struct Scene {
  std::vector<View> views;
  std::vector<DepthMap> depths;  // ground truth; 0 where the ray misses
  std::vector<Anchor> anchors;

  std::vector<Camera> cameras() const;
};

// Analytic ray-surface intersection at every pixel center with a
// Lambertian procedural texture. Throws ContractError if a camera sees no
// surface or a visible depth leaves the scene's depth range.
Scene render(const SceneSpec& spec);

// Texture value of channel `ch` at a world point.
double texture_at(const SceneSpec& spec, const Point3& p, int ch);

// Camera-frame depth of the first surface hit along the ray through `pix`,
// or nullopt for a miss.
std::optional<double> ray_depth(const SceneSpec& spec, const Camera& cam, const Pixel& pix);

// Multiplies every valid depth by (1 + u), u ~ U[-rel, rel].
DepthMap perturb_depth(const DepthMap& depth, double rel, std::uint64_t seed);

// Sub-window of a view; the principal point shifts accordingly.
View crop_view(const View& view, int row0, int col0, int height, int width);
DepthMap crop_depth(const DepthMap& depth, int row0, int col0, int height, int width);

}  // namespace selfmvs::synthetic
