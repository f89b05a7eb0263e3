#include "selfmvs/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "selfmvs/warping.hpp"

namespace selfmvs {
namespace {

constexpr std::size_t kGridBytes = sizeof(double);

memory::TrackedBytes track_grad(const Grid<double>& g) {
  return memory::TrackedBytes(memory::BufferKind::kGradient,
                              static_cast<std::size_t>(g.size()) * kGridBytes);
}

void check_depth_matches(const DepthMap& depth, const Camera& cam, const char* who) {
  SELFMVS_CHECK(size_of(depth) == cam.image_size(),
                std::string(who) + ": depth map size does not match the reference camera");
}

// Photometric term of one warped source view. Adds d numerator / d warped
// into `grad_warped` (same layout as the image) when non-null. Returns the
// unnormalized numerator; `count` receives the mask count.
double photometric_numerator(const Image& ref, const Image& warped, const Mask& mask,
                             Image* grad_warped, double* count) {
  const int H = ref.height();
  const int W = ref.width();
  const int C = ref.num_channels();
  double num = 0.0;
  *count = 0.0;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      if (mask(r, c)) *count += 1.0;
    }
  }
  for (int ch = 0; ch < C; ++ch) {
    const auto& I = ref[ch];
    const auto& Wp = warped[ch];
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) {
        if (!mask(r, c)) continue;
        const double e = Wp(r, c) - I(r, c);
        num += e * e;
        if (grad_warped) (*grad_warped)[ch](r, c) += 2.0 * e;
        if (c + 1 < W && mask(r, c + 1)) {
          const double ex = (Wp(r, c + 1) - Wp(r, c)) - (I(r, c + 1) - I(r, c));
          num += ex * ex;
          if (grad_warped) {
            (*grad_warped)[ch](r, c + 1) += 2.0 * ex;
            (*grad_warped)[ch](r, c) -= 2.0 * ex;
          }
        }
        if (r + 1 < H && mask(r + 1, c)) {
          const double ey = (Wp(r + 1, c) - Wp(r, c)) - (I(r + 1, c) - I(r, c));
          num += ey * ey;
          if (grad_warped) {
            (*grad_warped)[ch](r + 1, c) += 2.0 * ey;
            (*grad_warped)[ch](r, c) -= 2.0 * ey;
          }
        }
      }
    }
  }
  return num;
}

// Chain rule through the warp: sum over channels of dL/dW * dW/dd.
void accumulate_depth_grad(const Image& grad_warped, const Image& dwarp_ddepth, double scale,
                           Grid<double>& grad) {
  for (int ch = 0; ch < grad_warped.num_channels(); ++ch) {
    grad += scale * grad_warped[ch] * dwarp_ddepth[ch];
  }
}

void check_views(const Image& ref, const Camera& ref_cam, std::span<const View> sources,
                 const DepthMap& depth, const char* who) {
  SELFMVS_CHECK(!sources.empty(), std::string(who) + ": at least one source view required");
  SELFMVS_CHECK(ref.size() == ref_cam.image_size(),
                std::string(who) + ": reference image does not match its camera");
  check_depth_matches(depth, ref_cam, who);
  for (const auto& v : sources) {
    SELFMVS_CHECK(v.image.num_channels() == ref.num_channels(),
                  std::string(who) + ": channel count differs between views");
  }
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {pc, dc, dc_high, dc_low, ssim, smooth}) {
    SELFMVS_CHECK(std::isfinite(w) && w >= 0.0, "loss weights must be finite and >= 0");
  }
}

double LossReport::value(const std::string& name) const {
  auto it = components.find(name);
  return it == components.end() ? 0.0 : it->second.value;
}

double LossReport::weighted_sum() const {
  double s = 0.0;
  for (const auto& [name, term] : components) s += term.weight * term.value;
  return s;
}

bool LossReport::flagged(const std::string& prefix) const {
  auto it = flags.lower_bound(prefix);
  return it != flags.end() && it->compare(0, prefix.size(), prefix) == 0;
}

std::pair<Image, Image> image_gradient(const Image& img) {
  const int H = img.height();
  const int W = img.width();
  SELFMVS_CHECK(H >= 2 && W >= 2, "image_gradient: image must be at least 2x2");
  Image dx(H, W, img.num_channels());
  Image dy(H, W, img.num_channels());
  for (int ch = 0; ch < img.num_channels(); ++ch) {
    dx[ch].leftCols(W - 1) = img[ch].rightCols(W - 1) - img[ch].leftCols(W - 1);
    dy[ch].topRows(H - 1) = img[ch].bottomRows(H - 1) - img[ch].topRows(H - 1);
  }
  return {std::move(dx), std::move(dy)};
}

LossReport photometric_loss(const Image& ref, const Camera& ref_cam,
                            std::span<const View> sources, const DepthMap& depth,
                            bool with_grad) {
  check_views(ref, ref_cam, sources, depth, "photometric_loss");
  LossReport report;
  double value = 0.0;
  if (with_grad) report.grad_depth = Grid<double>::Zero(depth.rows(), depth.cols());
  for (std::size_t j = 0; j < sources.size(); ++j) {
    const WarpResult warp =
        warp_image(sources[j].image, depth, ref_cam, sources[j].camera, with_grad);
    std::optional<Image> gw;
    if (with_grad) gw = Image(ref.height(), ref.width(), ref.num_channels());
    double count = 0.0;
    const double num =
        photometric_numerator(ref, warp.warped, warp.mask, gw ? &*gw : nullptr, &count);
    if (count == 0.0) {
      report.flags.insert("pc.empty_mask." + std::to_string(j));
      continue;
    }
    value += num / count;
    if (with_grad) accumulate_depth_grad(*gw, *warp.d_ddepth, 1.0 / count, *report.grad_depth);
  }
  report.components["pc"] = {value, 1.0};
  report.total = value;
  if (with_grad) report.grad_bytes = track_grad(*report.grad_depth);
  return report;
}

SsimLoss ssim_loss(const Image& ref, const Image& warped, const Mask& mask, bool with_grad) {
  SELFMVS_CHECK(ref.size() == warped.size() && ref.num_channels() == warped.num_channels(),
                "ssim_loss: image sizes differ");
  SELFMVS_CHECK(size_of(mask) == ref.size(), "ssim_loss: mask size differs from images");
  const int H = ref.height();
  const int W = ref.width();
  const int C = ref.num_channels();
  SsimLoss out;
  if (with_grad) out.grad_warped = Image(H, W, C);

  // Window centers whose 3x3 neighbourhood is fully valid.
  Mask window = Mask::Constant(H, W, false);
  int n_windows = 0;
  for (int r = 1; r + 1 < H; ++r) {
    for (int c = 1; c + 1 < W; ++c) {
      if (mask.block(r - 1, c - 1, 3, 3).all()) {
        window(r, c) = true;
        ++n_windows;
      }
    }
  }
  if (n_windows == 0) {
    out.empty = true;
    return out;
  }
  const double norm = 1.0 / (static_cast<double>(n_windows) * C);
  constexpr double kInv9 = 1.0 / 9.0;
  double sum = 0.0;
  for (int ch = 0; ch < C; ++ch) {
    const auto& X = ref[ch];
    const auto& Y = warped[ch];
    for (int r = 1; r + 1 < H; ++r) {
      for (int c = 1; c + 1 < W; ++c) {
        if (!window(r, c)) continue;
        double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const double x = X(r + dr, c + dc);
            const double y = Y(r + dr, c + dc);
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
          }
        }
        const double mx = sx * kInv9, my = sy * kInv9;
        const double vx = sxx * kInv9 - mx * mx;
        const double vy = syy * kInv9 - my * my;
        const double cxy = sxy * kInv9 - mx * my;
        const double A = 2.0 * mx * my + kSsimC1;
        const double B = 2.0 * cxy + kSsimC2;
        const double Cden = mx * mx + my * my + kSsimC1;
        const double D = vx + vy + kSsimC2;
        const double ssim = (A * B) / (Cden * D);
        // SSIM <= 1 holds exactly; rounding can overshoot by an ulp.
        sum += std::max(0.0, 0.5 * (1.0 - ssim));
        if (!with_grad) continue;
        const double dS_dmy = 2.0 * mx * B / (Cden * D) - ssim * 2.0 * my / Cden;
        const double dS_dcxy = 2.0 * A / (Cden * D);
        const double dS_dvy = -ssim / D;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const double x = X(r + dr, c + dc);
            const double y = Y(r + dr, c + dc);
            const double dS_dy = dS_dmy * kInv9 + dS_dvy * 2.0 * (y - my) * kInv9 +
                                 dS_dcxy * (x - mx) * kInv9;
            (*out.grad_warped)[ch](r + dr, c + dc) -= 0.5 * norm * dS_dy;
          }
        }
      }
    }
  }
  out.value = sum * norm;
  return out;
}

ScalarLoss smoothness_loss(const DepthMap& depth, const Image& ref, bool with_grad) {
  SELFMVS_CHECK(size_of(depth) == ref.size(), "smoothness_loss: depth and image sizes differ");
  const int H = static_cast<int>(depth.rows());
  const int W = static_cast<int>(depth.cols());
  const int C = ref.num_channels();
  ScalarLoss out;
  const Mask valid = depth_validity(depth);
  double n = 0.0, mean = 0.0;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      if (valid(r, c)) {
        mean += depth(r, c);
        n += 1.0;
      }
    }
  }
  if (with_grad) out.grad = Grid<double>::Zero(H, W);
  if (n == 0.0) {
    out.empty = true;
    return out;
  }
  mean /= n;
  const double inv_mean = 1.0 / mean;

  auto edge_weight = [&](int r0, int c0, int r1, int c1) {
    double g = 0.0;
    for (int ch = 0; ch < C; ++ch) g += std::abs(ref[ch](r1, c1) - ref[ch](r0, c0));
    return std::exp(-g / C);
  };
  auto sign = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };

  double nx = 0.0, ny = 0.0;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      if (!valid(r, c)) continue;
      if (c + 1 < W && valid(r, c + 1)) nx += 1.0;
      if (r + 1 < H && valid(r + 1, c)) ny += 1.0;
    }
  }
  // d loss / d normalized depth.
  Grid<double> g_hat;
  if (with_grad) g_hat = Grid<double>::Zero(H, W);
  double sx = 0.0, sy = 0.0;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      if (!valid(r, c)) continue;
      if (c + 1 < W && valid(r, c + 1)) {
        const double w = edge_weight(r, c, r, c + 1);
        const double diff = (depth(r, c + 1) - depth(r, c)) * inv_mean;
        sx += std::abs(diff) * w;
        if (with_grad) {
          const double g = sign(diff) * w / nx;
          g_hat(r, c + 1) += g;
          g_hat(r, c) -= g;
        }
      }
      if (r + 1 < H && valid(r + 1, c)) {
        const double w = edge_weight(r, c, r + 1, c);
        const double diff = (depth(r + 1, c) - depth(r, c)) * inv_mean;
        sy += std::abs(diff) * w;
        if (with_grad) {
          const double g = sign(diff) * w / ny;
          g_hat(r + 1, c) += g;
          g_hat(r, c) -= g;
        }
      }
    }
  }
  if (nx == 0.0 && ny == 0.0) {
    out.empty = true;
    return out;
  }
  out.value = (nx > 0.0 ? sx / nx : 0.0) + (ny > 0.0 ? sy / ny : 0.0);
  if (with_grad) {
    // d_hat_k = d_k / mean, mean = sum(d) / n.
    double coupling = 0.0;
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) {
        if (valid(r, c)) coupling += g_hat(r, c) * depth(r, c);
      }
    }
    coupling *= inv_mean * inv_mean / n;
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) {
        if (valid(r, c)) (*out.grad)(r, c) = g_hat(r, c) * inv_mean - coupling;
      }
    }
  }
  return out;
}

LossReport depth_consistency_loss(const DepthMap& student, const DepthMap& pseudo,
                                  const Mask* region_mask, const LossWeights& weights,
                                  bool with_grad) {
  SELFMVS_CHECK(student.rows() == pseudo.rows() && student.cols() == pseudo.cols(),
                "depth_consistency_loss: student and pseudo-depth sizes differ");
  if (region_mask) {
    SELFMVS_CHECK(size_of(*region_mask) == size_of(student),
                  "depth_consistency_loss: region mask size differs");
  }
  weights.validate();
  const int H = static_cast<int>(student.rows());
  const int W = static_cast<int>(student.cols());
  LossReport report;
  if (with_grad) report.grad_depth = Grid<double>::Zero(H, W);

  // Partition 0: everything (no mask) or high quality; partition 1: low quality.
  double sum[2] = {0.0, 0.0};
  double count[2] = {0.0, 0.0};
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      if (!is_valid_depth(student(r, c)) || !is_valid_depth(pseudo(r, c))) continue;
      const int part = (region_mask == nullptr || (*region_mask)(r, c)) ? 0 : 1;
      const double e = student(r, c) - pseudo(r, c);
      sum[part] += e * e;
      count[part] += 1.0;
    }
  }
  const char* names[2] = {region_mask ? "dc_high" : "dc", "dc_low"};
  const double w[2] = {region_mask ? weights.dc_high : weights.dc, weights.dc_low};
  const int parts = region_mask ? 2 : 1;
  double mean[2] = {0.0, 0.0};
  for (int p = 0; p < parts; ++p) {
    if (count[p] == 0.0) {
      report.flags.insert(std::string(names[p]) + ".empty");
    } else {
      mean[p] = sum[p] / count[p];
    }
    report.components[names[p]] = {mean[p], w[p]};
  }
  report.total = report.weighted_sum();
  if (with_grad) {
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) {
        if (!is_valid_depth(student(r, c)) || !is_valid_depth(pseudo(r, c))) continue;
        const int part = (region_mask == nullptr || (*region_mask)(r, c)) ? 0 : 1;
        if (part >= parts || count[part] == 0.0) continue;
        (*report.grad_depth)(r, c) =
            w[part] * 2.0 * (student(r, c) - pseudo(r, c)) / count[part];
      }
    }
    report.grad_bytes = track_grad(*report.grad_depth);
  }
  return report;
}

LossReport total_loss(const LossInputs& in, const LossWeights& weights, bool with_grad) {
  weights.validate();
  check_views(in.ref_image, in.ref_cam, in.sources, in.depth, "total_loss");
  if (in.region_mask) {
    SELFMVS_CHECK(in.pseudo != nullptr, "total_loss: region mask given without pseudo-depth");
  }
  const int H = in.ref_cam.height();
  const int W = in.ref_cam.width();
  const int C = in.ref_image.num_channels();
  LossReport report;
  Grid<double> grad;
  if (with_grad) {
    grad = Grid<double>::Zero(H, W);
    report.grad_bytes = track_grad(grad);
  }

  double pc = 0.0, ssim = 0.0;
  for (std::size_t j = 0; j < in.sources.size(); ++j) {
    const View& src = in.sources[j];
    const WarpResult warp = warp_image(src.image, in.depth, in.ref_cam, src.camera, with_grad);
    std::optional<Image> gw;
    std::optional<memory::TrackedBytes> gw_bytes;
    if (with_grad) {
      gw = Image(H, W, C);
      gw_bytes.emplace(memory::BufferKind::kGradient, gw->byte_size());
    }
    double count = 0.0;
    const double num =
        photometric_numerator(in.ref_image, warp.warped, warp.mask, gw ? &*gw : nullptr, &count);
    if (count == 0.0) {
      report.flags.insert("pc.empty_mask." + std::to_string(j));
    } else {
      pc += num / count;
      if (with_grad) accumulate_depth_grad(*gw, *warp.d_ddepth, weights.pc / count, grad);
    }
    SsimLoss s = ssim_loss(in.ref_image, warp.warped, warp.mask, with_grad);
    if (s.empty) {
      report.flags.insert("ssim.empty." + std::to_string(j));
    } else {
      ssim += s.value;
      if (with_grad) accumulate_depth_grad(*s.grad_warped, *warp.d_ddepth, weights.ssim, grad);
    }
  }
  report.components["pc"] = {pc, weights.pc};
  report.components["ssim"] = {ssim, weights.ssim};

  ScalarLoss smooth = smoothness_loss(in.depth, in.ref_image, with_grad);
  if (smooth.empty) report.flags.insert("smooth.empty");
  report.components["smooth"] = {smooth.value, weights.smooth};
  if (with_grad) grad += weights.smooth * *smooth.grad;

  if (in.pseudo) {
    LossReport dc = depth_consistency_loss(in.depth, *in.pseudo, nullptr, weights, with_grad);
    report.components["dc"] = dc.components.at("dc");
    report.flags.insert(dc.flags.begin(), dc.flags.end());
    if (with_grad) grad += *dc.grad_depth;
    if (in.region_mask) {
      LossReport part =
          depth_consistency_loss(in.depth, *in.pseudo, in.region_mask, weights, with_grad);
      report.components["dc_high"] = part.components.at("dc_high");
      report.components["dc_low"] = part.components.at("dc_low");
      report.flags.insert(part.flags.begin(), part.flags.end());
      if (with_grad) grad += *part.grad_depth;
    }
  }
  report.total = report.weighted_sum();
  if (with_grad) {
    grad = depth_validity(in.depth).select(grad, 0.0);
    report.grad_depth = std::move(grad);
  }
  return report;
}

}  // namespace selfmvs
