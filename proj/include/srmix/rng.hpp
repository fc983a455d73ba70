#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace srmix {

/// Counter-based generator: draw i is a SplitMix64 finalisation of
/// (key + (i + 1) * golden). Streams for independent pipeline stages are
/// derived from the key, so consuming one stream never shifts another.
///
/// Satisfies UniformRandomBitGenerator and can drive <random> distributions.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;

  Rng derive(std::string_view purpose) const noexcept;
  Rng derive(std::uint64_t index) const noexcept;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  Rng(std::uint64_t key, std::uint64_t counter) noexcept : key_(key), counter_(counter) {}

  std::uint64_t key_;
  std::uint64_t counter_;
};

std::uint64_t mix64(std::uint64_t z) noexcept;
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;

}  // namespace srmix
