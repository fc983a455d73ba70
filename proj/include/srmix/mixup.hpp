#pragma once

#include <cstddef>
#include <vector>

#include "srmix/image.hpp"
#include "srmix/rng.hpp"

namespace srmix {

struct MixupConfig {
  bool enabled = false;
  double alpha = 1.2;

  bool operator==(const MixupConfig&) const = default;
};

/// One draw from Beta(alpha, alpha) as X / (X + Y) with X, Y ~ Gamma(alpha, 1).
double sample_lambda(double alpha, Rng& rng);

/// lambda * i + (1 - lambda) * j on both planes with the same lambda.
ImagePair mixup_pair(const ImagePair& pair_i, const ImagePair& pair_j, double lambda);

/// Element k becomes mixup_pair(batch[k], batch[partner[k]], lambdas[k]).
std::vector<ImagePair> mixup_batch(const std::vector<ImagePair>& batch,
                                   const std::vector<double>& lambdas,
                                   const std::vector<std::size_t>& partner);

/// Draws one lambda per element, then a uniform permutation for partners.
/// Returns the batch unchanged when mixing is disabled.
std::vector<ImagePair> mixup_batch(const std::vector<ImagePair>& batch, const MixupConfig& config,
                                   Rng& rng);

}  // namespace srmix
