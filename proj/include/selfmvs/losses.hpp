#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>

#include "selfmvs/geometry.hpp"
#include "selfmvs/memory_probe.hpp"
#include "selfmvs/types.hpp"

namespace selfmvs {

struct View {
  Image image;
  Camera camera;
};

// Term weights of the self-supervision objective. `dc` weights the plain
// depth-consistency term; `dc_high` / `dc_low` weight its high- and
// low-quality partitions when a region mask is supplied.
struct LossWeights {
  double pc = 0.8;
  double dc = 0.1;
  double dc_high = 0.0;
  double dc_low = 0.0;
  double ssim = 0.2;
  double smooth = 0.0067;

  // Single depth-consistency weight, no partitioning.
  static LossWeights baseline() { return {}; }
  // Partitioned depth consistency: 0.5 on high-quality, 0.1 on low-quality.
  static LossWeights region_aware() { return {0.8, 0.0, 0.5, 0.1, 0.2, 0.0067}; }

  LossWeights scaled(double s) const {
    return {pc * s, dc * s, dc_high * s, dc_low * s, ssim * s, smooth * s};
  }
  void validate() const;
};

struct LossTerm {
  double value = 0.0;
  double weight = 0.0;
};

struct LossReport {
  double total = 0.0;
  std::map<std::string, LossTerm> components;
  // Degenerate evaluations, e.g. "pc.empty_mask.2" or "dc_high.empty".
  std::set<std::string> flags;
  std::optional<Grid<double>> grad_depth;
  memory::TrackedBytes grad_bytes;

  double value(const std::string& name) const;
  double weighted_sum() const;
  bool flagged(const std::string& prefix) const;
};

// Scalar loss with an optional gradient over one raster.
struct ScalarLoss {
  double value = 0.0;
  bool empty = false;
  std::optional<Grid<double>> grad;
};

// Forward differences; the last column of dx and the last row of dy are 0.
std::pair<Image, Image> image_gradient(const Image& img);

// Masked photometric consistency summed over source views, each view
// normalized by its own mask count. Per pixel the error is the squared
// difference summed over channels, for intensities and for both forward
// image gradients. Gradient terms require both pixels of the difference to
// be valid. Component "pc" carries the value with weight 1.
LossReport photometric_loss(const Image& ref, const Camera& ref_cam,
                            std::span<const View> sources, const DepthMap& depth,
                            bool with_grad);

struct SsimLoss {
  double value = 0.0;
  bool empty = false;
  // d value / d warped, per channel.
  std::optional<Image> grad_warped;
};

inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

// Mean of (1 - SSIM) / 2 over 3x3 windows whose nine pixels are all valid,
// averaged over channels.
SsimLoss ssim_loss(const Image& ref, const Image& warped, const Mask& mask, bool with_grad);

// Edge-aware first-order smoothness of the mean-normalized depth:
// mean_x |dx d^| exp(-|dx I|) + mean_y |dy d^| exp(-|dy I|), where |dx I|
// is averaged over channels and only pairs of valid depths count.
ScalarLoss smoothness_loss(const DepthMap& depth, const Image& ref, bool with_grad);

// Squared depth error against a constant pseudo-depth. Without a region
// mask: component "dc" (mean over pixels valid in both maps), weighted by
// weights.dc. With one: "dc_high" and "dc_low", each the mean over its own
// partition, weighted by dc_high / dc_low.
LossReport depth_consistency_loss(const DepthMap& student, const DepthMap& pseudo,
                                  const Mask* region_mask, const LossWeights& weights,
                                  bool with_grad);

struct LossInputs {
  const Image& ref_image;
  const Camera& ref_cam;
  std::span<const View> sources;
  const DepthMap& depth;
  const DepthMap* pseudo = nullptr;
  const Mask* region_mask = nullptr;
};

// Weighted objective pc, ssim, smooth, dc, dc_high, dc_low. SSIM is summed
// over source views like the photometric term. The plain dc term needs a
// pseudo-depth; the partitioned terms additionally need a region mask.
LossReport total_loss(const LossInputs& in, const LossWeights& weights, bool with_grad);

}  // namespace selfmvs
