#include "srmix/augment.hpp"

#include <random>
#include <string>

#include "srmix/error.hpp"

namespace srmix {

int window_count(int extent, int size, int stride) {
  if (size < 1 || stride < 1) throw Error(ErrorCode::InvalidConfig, "size and stride must be >= 1");
  if (size > extent) {
    throw Error(ErrorCode::SizeExceedsImage,
                "window " + std::to_string(size) + " exceeds extent " + std::to_string(extent));
  }
  return (extent - size) / stride + 1;
}

std::vector<ImageBuffer> crop_subimages(const ImageBuffer& image, int size, int stride) {
  const int rows = window_count(image.height(), size, stride);
  const int cols = window_count(image.width(), size, stride);
  std::vector<ImageBuffer> out;
  out.reserve(static_cast<std::size_t>(rows) * cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) out.push_back(crop(image, i * stride, j * stride, size, size));
  }
  return out;
}

namespace {

void check_transform(int id) {
  if (id < 0 || id >= kDihedralCount) {
    throw Error(ErrorCode::InvalidTransformId, "transform id " + std::to_string(id) + " not in 0..7");
  }
}

}  // namespace

ImageBuffer dihedral_transform(const ImageBuffer& image, int transform_id) {
  check_transform(transform_id);
  if (transform_id == 0) return image;
  const int rot = transform_id % 4;
  const bool flip = transform_id >= 4;
  const int h = image.height();
  const int w = image.width();
  const int out_h = (rot % 2) ? w : h;
  const int out_w = (rot % 2) ? h : w;

  ImageBuffer out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const int rx = flip ? out_w - 1 - x : x;  // coordinate in the rotated image
      int sy = y;
      int sx = rx;
      switch (rot) {
        case 1: sy = rx; sx = w - 1 - y; break;
        case 2: sy = h - 1 - y; sx = w - 1 - rx; break;
        case 3: sy = h - 1 - rx; sx = y; break;
        default: break;
      }
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = image.at(sy, sx, c);
    }
  }
  return out;
}

// Element t = hflip^f . rot^r. Using rot . hflip = hflip . rot^-1:
//   (hflip^f2 rot^r2)(hflip^f1 rot^r1) = hflip^(f1^f2) rot^(r1 + (f1 ? -r2 : r2))
int compose_transforms(int second, int first) {
  check_transform(second);
  check_transform(first);
  const int f2 = second / 4, r2 = second % 4;
  const int f1 = first / 4, r1 = first % 4;
  const int r = ((r1 + (f1 ? -r2 : r2)) % 4 + 4) % 4;
  return (f1 ^ f2) * 4 + r;
}

int inverse_transform(int transform_id) {
  check_transform(transform_id);
  if (transform_id >= 4) return transform_id;  // reflections are involutions
  return (4 - transform_id) % 4;
}

ImagePair random_patch(const ImagePair& pair, int patch_size, Rng& rng) {
  check_pair(pair);
  const int h = pair.hr.height();
  const int w = pair.hr.width();
  if (patch_size < 1 || patch_size > h || patch_size > w) {
    throw Error(ErrorCode::PatchTooLarge, "patch " + std::to_string(patch_size) +
                                              " does not fit " + std::to_string(h) + "x" +
                                              std::to_string(w));
  }
  std::uniform_int_distribution<int> dy(0, h - patch_size);
  std::uniform_int_distribution<int> dx(0, w - patch_size);
  const int top = dy(rng);
  const int left = dx(rng);
  return {crop(pair.lr, top, left, patch_size, patch_size),
          crop(pair.hr, top, left, patch_size, patch_size)};
}

}  // namespace srmix
