#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace srmix {

/// H x W x 3 float image, row-major with interleaved RGB samples.
///
/// Samples are nominally in [0, 1]. Decoders and degraders clamp their
/// output; arithmetic helpers (mixing, noise) leave clamping to the caller
/// that knows whether the range can be violated.
class ImageBuffer {
 public:
  static constexpr int kChannels = 3;

  ImageBuffer() = default;
  ImageBuffer(int height, int width, float fill = 0.0f);
  ImageBuffer(int height, int width, std::vector<float> samples);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  bool empty() const noexcept { return samples_.empty(); }
  std::size_t size() const noexcept { return samples_.size(); }

  float& at(int y, int x, int c) noexcept {
    return samples_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
  }
  float at(int y, int x, int c) const noexcept {
    return samples_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
  }

  std::span<float> samples() noexcept { return samples_; }
  std::span<const float> samples() const noexcept { return samples_; }

  bool same_shape(const ImageBuffer& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  void clamp() noexcept;

  bool operator==(const ImageBuffer&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> samples_;
};

/// Aligned LR/HR buffers of identical dimensions.
struct ImagePair {
  ImageBuffer lr;
  ImageBuffer hr;

  bool operator==(const ImagePair&) const = default;
};

/// Throws DimensionMismatch when lr and hr differ in size.
void check_pair(const ImagePair& pair);

/// Copies the rectangle [top, top+height) x [left, left+width).
ImageBuffer crop(const ImageBuffer& image, int top, int left, int height, int width);

}  // namespace srmix
