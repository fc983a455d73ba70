#include "srmix/rng.hpp"

namespace srmix {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) noexcept {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng::Rng(std::uint64_t seed) noexcept : key_(mix64(seed ^ kGolden)), counter_(0) {}

Rng::result_type Rng::operator()() noexcept {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double Rng::uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

Rng Rng::derive(std::string_view purpose) const noexcept {
  return Rng(mix64(key_ ^ mix64(fnv1a64(purpose))), 0);
}

Rng Rng::derive(std::uint64_t index) const noexcept {
  return Rng(mix64(key_ ^ mix64(index + kGolden)), 0);
}

}  // namespace srmix
