#pragma once

#include <vector>

#include "srmix/image.hpp"
#include "srmix/rng.hpp"

namespace srmix {

/// Number of whole windows along one axis: floor((extent - size) / stride) + 1.
int window_count(int extent, int size, int stride);

/// All size x size windows anchored at multiples of stride, row-major order.
/// Remainder pixels not covered by a whole window are dropped.
std::vector<ImageBuffer> crop_subimages(const ImageBuffer& image, int size, int stride);

/// Elements of the dihedral group D4, indexed 0..7:
///   0 id, 1 rot90, 2 rot180, 3 rot270,
///   4 hflip, 5 hflip.rot90, 6 hflip.rot180, 7 hflip.rot270
/// where rotations are counter-clockwise and "hflip.rot90" means rotate first,
/// then mirror left-right.
inline constexpr int kDihedralCount = 8;

ImageBuffer dihedral_transform(const ImageBuffer& image, int transform_id);

/// Id of the transform equal to applying `second` after `first`.
int compose_transforms(int second, int first);

/// Id t' with t' . t == identity.
int inverse_transform(int transform_id);

/// Co-located patch_size crops of lr and hr at one uniformly drawn anchor.
ImagePair random_patch(const ImagePair& pair, int patch_size, Rng& rng);

}  // namespace srmix
