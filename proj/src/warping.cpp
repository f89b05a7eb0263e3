#include "selfmvs/warping.hpp"

#include <cmath>
#include <string>

#include "selfmvs/parallel.hpp"

namespace selfmvs {
namespace {

// Lower cell corner for bilinear interpolation on [0, n-1]. The last sample
// belongs to the cell to its left so that x = n-1 stays in range.
inline int cell_origin(double x, int n) {
  int i = static_cast<int>(std::floor(x));
  if (i >= n - 1) i = n - 2;
  if (i < 0) i = 0;
  return i;
}

}  // namespace

WarpCoords warp_coordinates(const DepthMap& depth_ref, const Camera& cam_ref,
                            const Camera& cam_src) {
  SELFMVS_CHECK(size_of(depth_ref) == cam_ref.image_size(),
                "warp_coordinates: depth map is " + std::to_string(depth_ref.rows()) + "x" +
                    std::to_string(depth_ref.cols()) + " but reference camera expects " +
                    std::to_string(cam_ref.height()) + "x" + std::to_string(cam_ref.width()));
  const int H = cam_ref.height();
  const int W = cam_ref.width();
  const Mat4 rel = relative_transform(cam_ref, cam_src);
  // h(d) = d * A p + b is the homogeneous source pixel for reference pixel p.
  const Mat3 A = cam_src.K() * rel.topLeftCorner<3, 3>() * cam_ref.K_inv();
  const Vec3 b = cam_src.K() * rel.topRightCorner<3, 1>();

  WarpCoords out;
  out.x = Grid<double>::Zero(H, W);
  out.y = Grid<double>::Zero(H, W);
  out.proj_depth = Grid<double>::Zero(H, W);
  out.dx_ddepth = Grid<double>::Zero(H, W);
  out.dy_ddepth = Grid<double>::Zero(H, W);
  out.mask = Mask::Constant(H, W, false);

  parallel_rows(H, [&](int r) {
    for (int c = 0; c < W; ++c) {
      const double d = depth_ref(r, c);
      if (!is_valid_depth(d)) continue;
      const Vec3 a = A * Vec3(c, r, 1.0);
      const Vec3 h = d * a + b;
      out.proj_depth(r, c) = h.z();
      if (!(h.z() > 1e-12)) continue;
      const double x = h.x() / h.z();
      const double y = h.y() / h.z();
      const double inv_z2 = 1.0 / (h.z() * h.z());
      out.x(r, c) = x;
      out.y(r, c) = y;
      out.dx_ddepth(r, c) = (a.x() * h.z() - h.x() * a.z()) * inv_z2;
      out.dy_ddepth(r, c) = (a.y() * h.z() - h.y() * a.z()) * inv_z2;
      out.mask(r, c) = cam_src.in_bounds(x, y);
    }
  });
  return out;
}

double sample_bilinear(const Grid<double>& img, double x, double y, double* d_dx,
                       double* d_dy) {
  const int H = static_cast<int>(img.rows());
  const int W = static_cast<int>(img.cols());
  const double tol = kBoundsTolerance;
  if (!(x >= -tol && y >= -tol && x <= W - 1 + tol && y <= H - 1 + tol)) {
    if (d_dx) *d_dx = 0.0;
    if (d_dy) *d_dy = 0.0;
    return 0.0;
  }
  if (W == 1 || H == 1) {
    // Degenerate raster: linear interpolation along the remaining axis.
    if (W == 1 && H == 1) {
      if (d_dx) *d_dx = 0.0;
      if (d_dy) *d_dy = 0.0;
      return img(0, 0);
    }
    const bool along_x = H == 1;
    const double t = along_x ? x : y;
    const int n = along_x ? W : H;
    const int i = cell_origin(t, n);
    const double f = t - i;
    const double v0 = along_x ? img(0, i) : img(i, 0);
    const double v1 = along_x ? img(0, i + 1) : img(i + 1, 0);
    if (d_dx) *d_dx = along_x ? v1 - v0 : 0.0;
    if (d_dy) *d_dy = along_x ? 0.0 : v1 - v0;
    return f == 0.0 ? v0 : (f == 1.0 ? v1 : (1.0 - f) * v0 + f * v1);
  }
  const int x0 = cell_origin(x, W);
  const int y0 = cell_origin(y, H);
  const double fx = x - x0;
  const double fy = y - y0;
  const double v00 = img(y0, x0), v01 = img(y0, x0 + 1);
  const double v10 = img(y0 + 1, x0), v11 = img(y0 + 1, x0 + 1);
  if (d_dx) *d_dx = (1.0 - fy) * (v01 - v00) + fy * (v11 - v10);
  if (d_dy) *d_dy = (1.0 - fx) * (v10 - v00) + fx * (v11 - v01);
  // Exact reproduction at integer coordinates.
  if (fx == 0.0 && fy == 0.0) return v00;
  if (fx == 1.0 && fy == 0.0) return v01;
  if (fx == 0.0 && fy == 1.0) return v10;
  if (fx == 1.0 && fy == 1.0) return v11;
  const double top = (1.0 - fx) * v00 + fx * v01;
  const double bottom = (1.0 - fx) * v10 + fx * v11;
  return (1.0 - fy) * top + fy * bottom;
}

double sample_bilinear(const Grid<double>& img, double x, double y) {
  return sample_bilinear(img, x, y, nullptr, nullptr);
}

Image bilinear_sample(const Image& img, const Grid<double>& x, const Grid<double>& y) {
  SELFMVS_CHECK(x.rows() == y.rows() && x.cols() == y.cols(),
                "bilinear_sample: coordinate grids differ in size");
  const int H = static_cast<int>(x.rows());
  const int W = static_cast<int>(x.cols());
  Image out(H, W, img.num_channels());
  parallel_rows(H, [&](int r) {
    for (int c = 0; c < W; ++c) {
      for (int ch = 0; ch < img.num_channels(); ++ch) {
        out[ch](r, c) = sample_bilinear(img[ch], x(r, c), y(r, c));
      }
    }
  });
  return out;
}

WarpResult warp_image(const Image& src, const DepthMap& depth_ref, const Camera& cam_ref,
                      const Camera& cam_src, bool with_grad) {
  SELFMVS_CHECK(src.size() == cam_src.image_size(),
                "warp_image: source image does not match source camera size");
  WarpCoords coords = warp_coordinates(depth_ref, cam_ref, cam_src);
  const int H = cam_ref.height();
  const int W = cam_ref.width();
  const int C = src.num_channels();

  WarpResult out;
  out.warped = Image(H, W, C);
  if (with_grad) out.d_ddepth = Image(H, W, C);
  parallel_rows(H, [&](int r) {
    for (int c = 0; c < W; ++c) {
      if (!coords.mask(r, c)) continue;
      const double x = coords.x(r, c);
      const double y = coords.y(r, c);
      for (int ch = 0; ch < C; ++ch) {
        if (with_grad) {
          double gx = 0.0, gy = 0.0;
          out.warped[ch](r, c) = sample_bilinear(src[ch], x, y, &gx, &gy);
          (*out.d_ddepth)[ch](r, c) =
              gx * coords.dx_ddepth(r, c) + gy * coords.dy_ddepth(r, c);
        } else {
          out.warped[ch](r, c) = sample_bilinear(src[ch], x, y);
        }
      }
    }
  });
  out.mask = std::move(coords.mask);
  out.src_x = std::move(coords.x);
  out.src_y = std::move(coords.y);
  const std::size_t plane = static_cast<std::size_t>(H) * W * sizeof(double);
  out.forward_bytes = memory::TrackedBytes(memory::BufferKind::kForward,
                                           out.warped.byte_size() + 2 * plane + H * W);
  if (with_grad) {
    out.grad_bytes = memory::TrackedBytes(memory::BufferKind::kGradient,
                                          out.d_ddepth->byte_size());
  }
  return out;
}

}  // namespace selfmvs
