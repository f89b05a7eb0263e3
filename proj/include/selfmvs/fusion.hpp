#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "selfmvs/cross_view.hpp"
#include "selfmvs/geometry.hpp"
#include "selfmvs/types.hpp"

namespace selfmvs {

struct PointCloud {
  struct Point {
    Point3 position;
    Vec3 color;  // RGB in [0,1]
    int view = -1;
  };
  std::vector<Point> points;

  std::size_t size() const { return points.size(); }
};

struct FusionView {
  Image image;
  DepthMap depth;
  ConfidenceMap confidence;
  Camera camera;
  // Views checked against this one; empty = every other view.
  std::vector<int> sources;
};

struct FusionConfig {
  CheckConfig geometry;
  double conf_threshold = 0.5;
  // Duplicate suppression: a pixel whose round trip to an earlier source
  // view stays within these tolerances belongs to that view's point. They
  // are independent of the filter thresholds above.
  double dedup_pixel = 1.0;
  double dedup_depth = 0.05;
};

// Photometric (confidence) and geometric filtering followed by point
// emission. A pixel survives when its confidence exceeds conf_threshold and
// at least tau4 of its sources pass e_pixel < tau2 and e_depth < tau3. The
// emitted depth is the mean of the pixel's depth and the re-projected depths
// of the passing sources. A surviving pixel emits unless an earlier view
// among its sources already observes the same surface point (dedup
// tolerances), so each point is emitted once, by the lowest view that sees it.
PointCloud fuse(std::span<const FusionView> views, const FusionConfig& cfg);

// Binary little-endian PLY: float32 x,y,z and uint8 red,green,blue.
void write_ply(const PointCloud& cloud, const std::filesystem::path& path);

}  // namespace selfmvs
