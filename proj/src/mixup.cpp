#include "srmix/mixup.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "srmix/error.hpp"

namespace srmix {

double sample_lambda(double alpha, Rng& rng) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::InvalidAlpha, "alpha must be positive, got " + std::to_string(alpha));
  }
  std::gamma_distribution<double> gamma(alpha, 1.0);
  for (;;) {
    const double x = gamma(rng);
    const double y = gamma(rng);
    if (x + y > 0.0) return x / (x + y);
  }
}

namespace {

// Weights (wa, wb) with wa + wb == 1 exactly, chosen so that the call with
// (b, a, 1 - lambda) produces the same two weights swapped.
struct MixWeights {
  double wa;
  double wb;
};

MixWeights mix_weights(double lambda) {
  const double wb = 1.0 - lambda;
  return {lambda < 0.5 ? 1.0 - wb : lambda, wb};
}

void mix_plane(const ImageBuffer& a, const ImageBuffer& b, MixWeights w, ImageBuffer& out) {
  const auto sa = a.samples();
  const auto sb = b.samples();
  auto so = out.samples();
  for (std::size_t i = 0; i < so.size(); ++i) {
    so[i] = static_cast<float>(w.wa * sa[i] + w.wb * sb[i]);
  }
}

}  // namespace

ImagePair mixup_pair(const ImagePair& pair_i, const ImagePair& pair_j, double lambda) {
  check_pair(pair_i);
  check_pair(pair_j);
  if (!pair_i.lr.same_shape(pair_j.lr)) {
    throw Error(ErrorCode::DimensionMismatch, "mixup partners differ in size");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(ErrorCode::LambdaOutOfRange, "lambda " + std::to_string(lambda));
  }
  ImagePair out{ImageBuffer(pair_i.lr.height(), pair_i.lr.width()),
                ImageBuffer(pair_i.hr.height(), pair_i.hr.width())};
  const MixWeights w = mix_weights(lambda);
  mix_plane(pair_i.lr, pair_j.lr, w, out.lr);
  mix_plane(pair_i.hr, pair_j.hr, w, out.hr);
  return out;
}

std::vector<ImagePair> mixup_batch(const std::vector<ImagePair>& batch,
                                   const std::vector<double>& lambdas,
                                   const std::vector<std::size_t>& partner) {
  if (lambdas.size() != batch.size() || partner.size() != batch.size()) {
    throw Error(ErrorCode::ShapeMismatch, "one lambda and one partner per batch element");
  }
  std::vector<ImagePair> out;
  out.reserve(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    if (partner[k] >= batch.size()) throw Error(ErrorCode::ShapeMismatch, "partner out of range");
    out.push_back(mixup_pair(batch[k], batch[partner[k]], lambdas[k]));
  }
  return out;
}

std::vector<ImagePair> mixup_batch(const std::vector<ImagePair>& batch, const MixupConfig& config,
                                   Rng& rng) {
  if (batch.empty()) throw Error(ErrorCode::EmptyDataset, "empty batch");
  if (!config.enabled) return batch;
  std::vector<double> lambdas(batch.size());
  for (double& l : lambdas) l = sample_lambda(config.alpha, rng);
  std::vector<std::size_t> partner(batch.size());
  std::iota(partner.begin(), partner.end(), std::size_t{0});
  std::shuffle(partner.begin(), partner.end(), rng);
  return mixup_batch(batch, lambdas, partner);
}

}  // namespace srmix
