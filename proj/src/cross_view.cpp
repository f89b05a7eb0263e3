#include "selfmvs/cross_view.hpp"

#include <cmath>
#include <mutex>
#include <string>

#include "selfmvs/parallel.hpp"

namespace selfmvs {

void CheckConfig::validate() const {
  SELFMVS_CHECK(tau2 > 0.0 && tau3 > 0.0, "check config: tau2 and tau3 must be positive");
  SELFMVS_CHECK(n_sources >= 1, "check config: n_sources must be >= 1");
  SELFMVS_CHECK(tau4 >= 1 && tau4 <= n_sources, "check config: tau4 must be in [1, n_sources]");
}

DepthGallery::DepthGallery(const DepthGallery& other) {
  std::shared_lock lock(other.mutex_);
  entries_ = other.entries_;
}

DepthGallery& DepthGallery::operator=(const DepthGallery& other) {
  if (this != &other) {
    auto snapshot = [&] {
      std::shared_lock lock(other.mutex_);
      return other.entries_;
    }();
    std::unique_lock lock(mutex_);
    entries_ = std::move(snapshot);
  }
  return *this;
}

std::uint64_t DepthGallery::update(int view, DepthMap depth, ConfidenceMap confidence) {
  SELFMVS_CHECK(depth.rows() == confidence.rows() && depth.cols() == confidence.cols(),
                "gallery update: depth and confidence sizes differ for view " +
                    std::to_string(view));
  SELFMVS_CHECK((confidence >= 0.0).all() && (confidence <= 1.0).all(),
                "gallery update: confidence outside [0,1] for view " + std::to_string(view));
  auto entry = std::make_shared<GalleryEntry>();
  entry->depth = std::move(depth);
  entry->confidence = std::move(confidence);
  std::unique_lock lock(mutex_);
  auto it = entries_.find(view);
  entry->version = it == entries_.end() ? 1 : it->second->version + 1;
  const auto version = entry->version;
  entries_[view] = std::move(entry);
  return version;
}

std::shared_ptr<const GalleryEntry> DepthGallery::get(int view) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(view);
  if (it == entries_.end()) {
    throw ContractError("depth gallery has no entry for view " + std::to_string(view));
  }
  return it->second;
}

bool DepthGallery::contains(int view) const {
  std::shared_lock lock(mutex_);
  return entries_.count(view) > 0;
}

std::vector<int> DepthGallery::views() const {
  std::shared_lock lock(mutex_);
  std::vector<int> ids;
  for (const auto& [id, e] : entries_) ids.push_back(id);
  return ids;
}

ReprojectionErrors reprojection_errors(const DepthMap& ref_depth, const DepthMap& src_depth,
                                       const Camera& cam_ref, const Camera& cam_src) {
  SELFMVS_CHECK(size_of(ref_depth) == cam_ref.image_size(),
                "reprojection_errors: reference depth does not match its camera");
  SELFMVS_CHECK(size_of(src_depth) == cam_src.image_size(),
                "reprojection_errors: source depth does not match its camera");
  const int H = cam_ref.height();
  const int W = cam_ref.width();
  const Mat4 ref_to_src = relative_transform(cam_ref, cam_src);
  const Mat4 src_to_ref = invert_rigid(ref_to_src);

  ReprojectionErrors out;
  out.e_pixel = Grid<double>::Zero(H, W);
  out.e_depth = Grid<double>::Zero(H, W);
  out.reprojected_depth = Grid<double>::Zero(H, W);
  out.src_row = Grid<int>::Constant(H, W, -1);
  out.src_col = Grid<int>::Constant(H, W, -1);
  out.defined = Mask::Constant(H, W, false);

  parallel_rows(H, [&](int r) {
    for (int c = 0; c < W; ++c) {
      const double d1 = ref_depth(r, c);
      if (!is_valid_depth(d1)) continue;
      // Hop 1: reference pixel -> source pixel.
      const Vec3 p_ref = d1 * (cam_ref.K_inv() * Vec3(c, r, 1.0));
      const Vec3 p_src = transform_point(ref_to_src, p_ref);
      if (!(p_src.z() > 0.0)) continue;
      const Vec3 h_src = cam_src.K() * p_src;
      const double xs = h_src.x() / h_src.z();
      const double ys = h_src.y() / h_src.z();
      if (!cam_src.in_bounds(xs, ys)) continue;
      const int cs = static_cast<int>(std::lround(xs));
      const int rs = static_cast<int>(std::lround(ys));
      const double ds = src_depth(rs, cs);
      if (!is_valid_depth(ds)) continue;
      // Hop 2: source pixel with its own depth -> reference.
      const Vec3 q_src = ds * (cam_src.K_inv() * Vec3(xs, ys, 1.0));
      const Vec3 q_ref = transform_point(src_to_ref, q_src);
      if (!(q_ref.z() > 0.0)) continue;
      const Vec3 h_ref = cam_ref.K() * q_ref;
      const double xr = h_ref.x() / h_ref.z();
      const double yr = h_ref.y() / h_ref.z();
      out.e_pixel(r, c) = std::hypot(xr - c, yr - r);
      out.e_depth(r, c) = std::abs(q_ref.z() - d1) / d1;
      out.reprojected_depth(r, c) = q_ref.z();
      out.src_row(r, c) = rs;
      out.src_col(r, c) = cs;
      out.defined(r, c) = true;
    }
  });
  return out;
}

double QualityMask::average() const {
  if (mask.size() == 0) return 0.0;
  return static_cast<double>(mask.count()) / static_cast<double>(mask.size());
}

Grid<int> count_passing(std::span<const ReprojectionErrors> checks, double tau2, double tau3) {
  SELFMVS_CHECK(!checks.empty(), "count_passing: no checks");
  const auto H = checks[0].defined.rows();
  const auto W = checks[0].defined.cols();
  Grid<int> counts = Grid<int>::Zero(H, W);
  for (const auto& e : checks) {
    counts += (e.defined && e.e_pixel < tau2 && e.e_depth < tau3).cast<int>();
  }
  return counts;
}

QualityMask quality_mask(int ref, const DepthGallery& gallery, std::span<const Camera> cams,
                         std::span<const int> sources, const CheckConfig& cfg) {
  SELFMVS_CHECK(cfg.tau2 > 0.0 && cfg.tau3 > 0.0, "quality_mask: tau2 and tau3 must be positive");
  SELFMVS_CHECK(!sources.empty(), "quality_mask: no source views");
  SELFMVS_CHECK(cfg.tau4 >= 1 && cfg.tau4 <= static_cast<int>(sources.size()),
                "quality_mask: tau4 = " + std::to_string(cfg.tau4) + " exceeds the " +
                    std::to_string(sources.size()) + " supplied source views");
  SELFMVS_CHECK(ref >= 0 && ref < static_cast<int>(cams.size()),
                "quality_mask: reference view has no camera");
  const auto ref_entry = gallery.get(ref);
  std::vector<ReprojectionErrors> checks;
  checks.reserve(sources.size());
  for (int s : sources) {
    SELFMVS_CHECK(s >= 0 && s < static_cast<int>(cams.size()) && s != ref,
                  "quality_mask: invalid source view " + std::to_string(s));
    const auto src_entry = gallery.get(s);
    checks.push_back(reprojection_errors(ref_entry->depth, src_entry->depth, cams[ref], cams[s]));
  }
  QualityMask out;
  out.pass_counts = count_passing(checks, cfg.tau2, cfg.tau3);
  out.mask = (ref_entry->confidence > cfg.tau1) && (out.pass_counts >= cfg.tau4);
  return out;
}

}  // namespace selfmvs
