#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "selfmvs/errors.hpp"

namespace selfmvs {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Continuous image coordinate: x = column, y = row. (0,0) is the center of
// the top-left pixel.
using Pixel = Vec2;
using Point3 = Vec3;

// Row-major H x W raster. rows() = H, cols() = W.
template <typename Scalar>
using Grid = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Mask = Grid<bool>;
using ConfidenceMap = Grid<double>;

// Camera-frame z per pixel. Non-positive or non-finite entries are holes.
using DepthMap = Grid<double>;

inline bool is_valid_depth(double d) { return std::isfinite(d) && d > 0.0; }

template <typename Derived>
Mask depth_validity(const Eigen::ArrayBase<Derived>& depth) {
  return depth.unaryExpr([](auto d) { return is_valid_depth(static_cast<double>(d)); });
}

struct ImageSize {
  int height = 0;
  int width = 0;
  bool operator==(const ImageSize&) const = default;
};

template <typename Derived>
ImageSize size_of(const Eigen::DenseBase<Derived>& g) {
  return {static_cast<int>(g.rows()), static_cast<int>(g.cols())};
}

// H x W x C intensities in [0,1], stored as one plane per channel.
struct Image {
  std::vector<Grid<double>> channels;

  Image() = default;
  Image(int height, int width, int n_channels)
      : channels(n_channels, Grid<double>::Zero(height, width)) {}

  int height() const { return channels.empty() ? 0 : static_cast<int>(channels[0].rows()); }
  int width() const { return channels.empty() ? 0 : static_cast<int>(channels[0].cols()); }
  int num_channels() const { return static_cast<int>(channels.size()); }
  ImageSize size() const { return {height(), width()}; }

  Grid<double>& operator[](int c) { return channels[c]; }
  const Grid<double>& operator[](int c) const { return channels[c]; }

  std::size_t byte_size() const {
    return channels.size() * static_cast<std::size_t>(height()) * width() * sizeof(double);
  }
};

// Throws ContractError unless the image has 1 or 3 channels of equal size
// with finite values in [0,1].
void validate_image(const Image& img);

// Mean absolute error over pixels valid in both maps; 0 if there are none.
double depth_mae(const DepthMap& estimate, const DepthMap& truth);

}  // namespace selfmvs
