#include "selfmvs/types.hpp"

#include <string>

namespace selfmvs {

void validate_image(const Image& img) {
  SELFMVS_CHECK(img.num_channels() == 1 || img.num_channels() == 3,
                "image must have 1 or 3 channels, got " + std::to_string(img.num_channels()));
  for (const auto& ch : img.channels) {
    SELFMVS_CHECK(ch.rows() == img.height() && ch.cols() == img.width(),
                  "image channels differ in size");
    SELFMVS_CHECK(ch.allFinite(), "image contains non-finite values");
    SELFMVS_CHECK((ch >= 0.0).all() && (ch <= 1.0).all(), "image values outside [0,1]");
  }
}

double depth_mae(const DepthMap& estimate, const DepthMap& truth) {
  SELFMVS_CHECK(size_of(estimate) == size_of(truth), "depth_mae: sizes differ");
  double sum = 0.0;
  double n = 0.0;
  for (Eigen::Index k = 0; k < truth.size(); ++k) {
    const double t = truth.data()[k];
    const double e = estimate.data()[k];
    if (!is_valid_depth(t) || !is_valid_depth(e)) continue;
    sum += std::abs(e - t);
    n += 1.0;
  }
  return n > 0.0 ? sum / n : 0.0;
}

}  // namespace selfmvs
