#pragma once

#include <optional>

#include "selfmvs/geometry.hpp"
#include "selfmvs/memory_probe.hpp"
#include "selfmvs/types.hpp"

namespace selfmvs {

// Per-pixel correspondence of the reference raster in a source view.
struct WarpCoords {
  Grid<double> x;           // source column
  Grid<double> y;           // source row
  Grid<double> proj_depth;  // source-camera-frame z of the lifted point
  Grid<double> dx_ddepth;   // d x / d reference depth
  Grid<double> dy_ddepth;   // d y / d reference depth
  Mask mask;                // valid depth, in front of source, inside source bounds
};

struct WarpResult {
  Image warped;
  Mask mask;
  Grid<double> src_x;
  Grid<double> src_y;
  // d warped / d reference depth, per channel. Zero where mask is false.
  std::optional<Image> d_ddepth;

  memory::TrackedBytes forward_bytes;
  memory::TrackedBytes grad_bytes;
};

// Lifts every reference pixel with `depth_ref` and projects it into the
// source camera. Invalid depths and cheirality failures are masked, not
// thrown. Throws ContractError if depth_ref does not match cam_ref's size.
WarpCoords warp_coordinates(const DepthMap& depth_ref, const Camera& cam_ref,
                            const Camera& cam_src);

// Bilinear lookup of one channel at (x, y). Returns 0 outside
// [0, W-1] x [0, H-1] (with kBoundsTolerance slack). Integer coordinates reproduce the input exactly.
double sample_bilinear(const Grid<double>& img, double x, double y);

// Same lookup plus the spatial derivatives of the interpolant. At cell
// boundaries the derivative of the cell to the right / below is used.
double sample_bilinear(const Grid<double>& img, double x, double y, double* d_dx, double* d_dy);

Image bilinear_sample(const Image& img, const Grid<double>& x, const Grid<double>& y);

// Resamples `src` into the reference raster through `depth_ref`. With
// `with_grad`, also returns the exact derivative of each warped intensity
// w.r.t. the reference depth at that pixel.
WarpResult warp_image(const Image& src, const DepthMap& depth_ref, const Camera& cam_ref,
                      const Camera& cam_src, bool with_grad);

}  // namespace selfmvs
