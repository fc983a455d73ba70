#include "srmix/toy_data.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>

#include "srmix/degradation.hpp"
#include "srmix/error.hpp"
#include "srmix/png_io.hpp"

namespace srmix {

namespace {

using Color = std::array<double, 3>;

Color random_color(Rng& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  return {u(rng), u(rng), u(rng)};
}

// Coverage of a signed distance (negative inside) over a one-pixel ramp.
double coverage(double distance) { return std::clamp(0.5 - distance, 0.0, 1.0); }

void blend(ImageBuffer& img, int y, int x, const Color& c, double a) {
  if (a <= 0.0) return;
  for (int ch = 0; ch < 3; ++ch) {
    img.at(y, x, ch) = static_cast<float>((1.0 - a) * img.at(y, x, ch) + a * c[ch]);
  }
}

}  // namespace

ImageBuffer toy_image(int size, Rng& rng) {
  if (size < 8) throw Error(ErrorCode::InvalidDimensions, "toy images need size >= 8");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double s = size;
  ImageBuffer img(size, size);

  const Color c0 = random_color(rng);
  const Color c1 = random_color(rng);
  const double angle = 2.0 * std::numbers::pi * u(rng);
  const double gx = std::cos(angle) / s;
  const double gy = std::sin(angle) / s;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double t = std::clamp(0.5 + (x - s / 2) * gx + (y - s / 2) * gy, 0.0, 1.0);
      for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = static_cast<float>((1 - t) * c0[ch] + t * c1[ch]);
    }
  }

  std::uniform_int_distribution<int> shapes(4, 8);
  const int count = shapes(rng);
  for (int k = 0; k < count; ++k) {
    const Color color = random_color(rng);
    const double cx = s * u(rng);
    const double cy = s * u(rng);
    const double extent = s * (0.08 + 0.25 * u(rng));
    const int kind = static_cast<int>(u(rng) * 3.0);
    const double theta = std::numbers::pi * u(rng);
    const double period = 3.0 + 9.0 * u(rng);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double dx = x + 0.5 - cx;
        const double dy = y + 0.5 - cy;
        const double r = std::hypot(dx, dy);
        double alpha = 0.0;
        if (kind == 0) {  // disc
          alpha = coverage(r - extent);
        } else if (kind == 1) {  // rotated box
          const double a = std::abs(dx * std::cos(theta) + dy * std::sin(theta));
          const double b = std::abs(-dx * std::sin(theta) + dy * std::cos(theta));
          alpha = coverage(std::max(a - extent, b - 0.6 * extent));
        } else {  // grating inside a soft disc
          const double phase = (dx * std::cos(theta) + dy * std::sin(theta)) * 2.0 * std::numbers::pi / period;
          alpha = coverage(r - 1.3 * extent) * (0.5 + 0.5 * std::sin(phase));
        }
        blend(img, y, x, color, alpha);
      }
    }
  }

  const double fx = 0.3 + 0.5 * u(rng);
  const double fy = 0.3 + 0.5 * u(rng);
  const double amp = 0.02 + 0.03 * u(rng);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double t = amp * std::sin(fx * x + 1.7 * std::sin(fy * y));
      for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = static_cast<float>(img.at(y, x, ch) + t);
    }
  }
  img.clamp();
  return quantize8(img);
}

void write_toy_dataset(const std::filesystem::path& root, const ToyDatasetSpec& spec) {
  if (spec.size % 4 != 0) throw Error(ErrorCode::NotDivisible, "toy image size must be divisible by 4");
  const Rng base(spec.seed);
  auto name = [](int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03d.png", i);
    return std::string(buf);
  };
  auto write_pairs = [&](const std::string& split, int count, std::uint64_t offset) {
    for (int i = 0; i < count; ++i) {
      Rng content = base.derive("content").derive(offset + static_cast<std::uint64_t>(i));
      Rng noise = base.derive("noise").derive(offset + static_cast<std::uint64_t>(i));
      const ImageBuffer hr = toy_image(spec.size, content);
      const ImageBuffer lr =
          add_signal_dependent_noise(bicubic_degrade(hr, 4), spec.sigma_read, spec.sigma_shot, noise);
      save_image(root / split / "hr" / name(i), hr, 8);
      save_image(root / split / "lr" / name(i), lr, 8);
    }
  };
  write_pairs("train", spec.train_pairs, 0);
  write_pairs("val", spec.val_pairs, 1000);
  for (int i = 0; i < spec.extra_hr; ++i) {
    Rng content = base.derive("content").derive(2000 + static_cast<std::uint64_t>(i));
    save_image(root / "extra" / "hr" / name(i), toy_image(spec.size, content), 8);
  }
}

}  // namespace srmix
