#include "srmix/image.hpp"

#include <algorithm>
#include <string>

#include "srmix/error.hpp"

namespace srmix {

ImageBuffer::ImageBuffer(int height, int width, float fill) : height_(height), width_(width) {
  if (height < 1 || width < 1) {
    throw Error(ErrorCode::InvalidDimensions,
                "image must be at least 1x1, got " + std::to_string(height) + "x" +
                    std::to_string(width));
  }
  samples_.assign(static_cast<std::size_t>(height) * width * kChannels, fill);
}

ImageBuffer::ImageBuffer(int height, int width, std::vector<float> samples)
    : height_(height), width_(width), samples_(std::move(samples)) {
  if (height < 1 || width < 1 ||
      samples_.size() != static_cast<std::size_t>(height) * width * kChannels) {
    throw Error(ErrorCode::InvalidDimensions, "sample count does not match " +
                                                  std::to_string(height) + "x" +
                                                  std::to_string(width) + "x3");
  }
}

void ImageBuffer::clamp() noexcept {
  for (float& v : samples_) v = std::clamp(v, 0.0f, 1.0f);
}

void check_pair(const ImagePair& pair) {
  if (!pair.lr.same_shape(pair.hr)) {
    throw Error(ErrorCode::DimensionMismatch,
                "LR " + std::to_string(pair.lr.height()) + "x" + std::to_string(pair.lr.width()) +
                    " vs HR " + std::to_string(pair.hr.height()) + "x" +
                    std::to_string(pair.hr.width()));
  }
}

ImageBuffer crop(const ImageBuffer& image, int top, int left, int height, int width) {
  if (top < 0 || left < 0 || top + height > image.height() || left + width > image.width()) {
    throw Error(ErrorCode::SizeExceedsImage, "crop window outside image");
  }
  ImageBuffer out(height, width);
  const auto src = image.samples();
  auto dst = out.samples();
  const std::size_t row = static_cast<std::size_t>(width) * ImageBuffer::kChannels;
  for (int y = 0; y < height; ++y) {
    const std::size_t from =
        (static_cast<std::size_t>(top + y) * image.width() + left) * ImageBuffer::kChannels;
    std::copy_n(src.begin() + from, row, dst.begin() + y * row);
  }
  return out;
}

}  // namespace srmix
