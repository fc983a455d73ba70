#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <vector>

#include "srmix/image.hpp"

namespace srmix {

/// Activation tensor in C x N x H x W order: each channel's plane covers the
/// whole batch contiguously, so a tensor is a C x (N*H*W) row-major matrix
/// and channel concatenation is plain stacking.
template <typename T>
struct Tensor {
  int channels = 0;
  int batch = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int c, int n, int h, int w, T fill = T(0))
      : channels(c), batch(n), height(h), width(w),
        data(static_cast<std::size_t>(c) * n * h * w, fill) {}

  std::size_t spatial() const noexcept { return static_cast<std::size_t>(height) * width; }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(batch) * spatial(); }
  std::size_t size() const noexcept { return data.size(); }

  T* channel(int c) noexcept { return data.data() + c * plane(); }
  const T* channel(int c) const noexcept { return data.data() + c * plane(); }

  T& at(int c, int n, int y, int x) noexcept {
    return data[c * plane() + n * spatial() + static_cast<std::size_t>(y) * width + x];
  }
  T at(int c, int n, int y, int x) const noexcept {
    return data[c * plane() + n * spatial() + static_cast<std::size_t>(y) * width + x];
  }

  bool same_shape(const Tensor& o) const noexcept {
    return channels == o.channels && batch == o.batch && height == o.height && width == o.width;
  }

  /// Tensor of the same shape filled with zeros.
  Tensor zeros_like() const { return Tensor(channels, batch, height, width); }

  bool operator==(const Tensor&) const = default;
};

template <typename T>
using MatrixRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<MatrixRM<T>> as_matrix(Tensor<T>& t) {
  return {t.data.data(), t.channels, static_cast<Eigen::Index>(t.plane())};
}

template <typename T>
Eigen::Map<const MatrixRM<T>> as_matrix(const Tensor<T>& t) {
  return {t.data.data(), t.channels, static_cast<Eigen::Index>(t.plane())};
}

/// Packs equally sized images into a 3 x N x H x W tensor.
template <typename T>
Tensor<T> images_to_tensor(std::span<const ImageBuffer> images);

/// Extracts batch element `index` as an image (no clamping).
template <typename T>
ImageBuffer tensor_to_image(const Tensor<T>& t, int index);

}  // namespace srmix
