#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <shared_mutex>
#include <span>
#include <vector>

#include "selfmvs/geometry.hpp"
#include "selfmvs/types.hpp"

namespace selfmvs {

struct CheckConfig {
  double tau1 = 0.5;   // confidence threshold
  double tau2 = 0.5;   // pixel re-projection error, pixels
  double tau3 = 0.01;  // relative depth error
  int tau4 = 4;        // minimum number of passing source views
  int n_sources = 10;  // S: sources checked per reference view

  void validate() const;
};

struct GalleryEntry {
  DepthMap depth;
  ConfidenceMap confidence;
  std::uint64_t version = 0;
};

// Cache of pseudo-depth and confidence per view. Readers receive an
// immutable snapshot, so a concurrent update is observed entirely or not
// at all.
class DepthGallery {
 public:
  DepthGallery() = default;
  DepthGallery(const DepthGallery& other);
  DepthGallery& operator=(const DepthGallery& other);

  // Replaces the entry of `view` and bumps its version. Throws
  // ContractError if depth and confidence differ in size or confidence
  // leaves [0,1].
  std::uint64_t update(int view, DepthMap depth, ConfidenceMap confidence);

  // Throws ContractError naming the view when absent.
  std::shared_ptr<const GalleryEntry> get(int view) const;
  bool contains(int view) const;
  std::vector<int> views() const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<int, std::shared_ptr<const GalleryEntry>> entries_;
};

// gallery_update as a free function over the gallery.
inline std::uint64_t gallery_update(DepthGallery& gallery, int view, DepthMap depth,
                                    ConfidenceMap confidence) {
  return gallery.update(view, std::move(depth), std::move(confidence));
}

struct ReprojectionErrors {
  Grid<double> e_pixel;
  Grid<double> e_depth;
  // Reference-frame depth of the round-tripped point.
  Grid<double> reprojected_depth;
  // Nearest source pixel used for the depth lookup, or -1.
  Grid<int> src_row;
  Grid<int> src_col;
  Mask defined;
};

// Two-hop reference -> source -> reference check. The source depth is read
// at the nearest source pixel; the re-lift uses the continuous source
// coordinate. `defined` is false where a hop leaves the image, meets an
// invalid depth, or lands behind a camera.
ReprojectionErrors reprojection_errors(const DepthMap& ref_depth, const DepthMap& src_depth,
                                       const Camera& cam_ref, const Camera& cam_src);

struct QualityMask {
  Mask mask;
  Grid<int> pass_counts;

  double average() const;
};

// High-quality mask: confidence > tau1 and at least tau4 of the sources pass
// both e_pixel < tau2 and e_depth < tau3. Undefined checks count as
// failures. `cams` is indexed by view id.
QualityMask quality_mask(int ref, const DepthGallery& gallery, std::span<const Camera> cams,
                         std::span<const int> sources, const CheckConfig& cfg);

// Counts of passing sources from precomputed reprojection errors.
Grid<int> count_passing(std::span<const ReprojectionErrors> checks, double tau2, double tau3);

}  // namespace selfmvs
