#pragma once

// Reference implementations used as test oracles. They are written
// independently of the library code they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "srmix/image.hpp"
#include "srmix/model.hpp"
#include "srmix/rng.hpp"
#include "srmix/tensor.hpp"

namespace srmix::testing {

/// Cubic convolution kernel with a = -0.5, written in the textbook form.
inline double reference_cubic(double x) {
  x = std::fabs(x);
  const double a = -0.5;
  if (x <= 1.0) return (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0;
  if (x < 2.0) return a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a;
  return 0.0;
}

/// Direct 2-D weighted sum over every source pixel (no separable pass, no tap
/// tables). Downscaling stretches the kernel by 1/scale; borders replicate;
/// weights are normalised; the result is clamped to [0,1].
inline ImageBuffer reference_resize(const ImageBuffer& in, int oh, int ow) {
  const double sy = static_cast<double>(oh) / in.height();
  const double sx = static_cast<double>(ow) / in.width();
  const double ky = std::min(1.0, sy);
  const double kx = std::min(1.0, sx);
  const int margin = static_cast<int>(std::ceil(2.0 / std::min(ky, kx))) + 2;
  ImageBuffer out(oh, ow);
  for (int u = 0; u < oh; ++u) {
    for (int v = 0; v < ow; ++v) {
      const double cy = (u + 0.5) / sy - 0.5;
      const double cx = (v + 0.5) / sx - 0.5;
      double acc[3] = {0, 0, 0};
      double wsum = 0.0;
      for (int i = -margin; i < in.height() + margin; ++i) {
        const double wy = ky * reference_cubic(ky * (cy - i));
        if (wy == 0.0) continue;
        for (int j = -margin; j < in.width() + margin; ++j) {
          const double wx = kx * reference_cubic(kx * (cx - j));
          if (wx == 0.0) continue;
          const int ii = std::clamp(i, 0, in.height() - 1);
          const int jj = std::clamp(j, 0, in.width() - 1);
          for (int c = 0; c < 3; ++c) acc[c] += wy * wx * in.at(ii, jj, c);
          wsum += wy * wx;
        }
      }
      for (int c = 0; c < 3; ++c) out.at(u, v, c) = static_cast<float>(std::clamp(acc[c] / wsum, 0.0, 1.0));
    }
  }
  return out;
}

/// Down by `factor`, then back up, both through reference_resize.
inline ImageBuffer reference_degrade(const ImageBuffer& hr, int factor) {
  return reference_resize(reference_resize(hr, hr.height() / factor, hr.width() / factor), hr.height(),
                          hr.width());
}

template <typename T>
Tensor<T> random_tensor(int c, int n, int h, int w, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<T> t(c, n, h, w);
  for (T& v : t.data) v = static_cast<T>(u(rng));
  return t;
}

struct GradientCheckReport {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double worst_relative = 0.0;
};

/// Central differences of the mean L1 loss for every network parameter at
/// double precision, compared with UNet::backward. Biases are set to small
/// random values so their paths carry signal.
inline GradientCheckReport check_all_gradients(const ModelConfig& cfg, int size, int batch, std::uint64_t seed,
                                               double step = 1e-5, double rel_tol = 1e-3,
                                               double abs_floor = 1e-8) {
  const UNet<double> net(cfg);
  Rng rng(seed);
  auto params = cast_parameters<double>(init_weights(cfg, rng));
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (const auto& p : net.layout().inventory()) {
    if (p.shape.size() == 1) {
      for (std::size_t i = 0; i < p.count; ++i) params[p.offset + i] = u(rng);
    }
  }
  const auto input = random_tensor<double>(3, batch, size, size, seed + 1, 0.0, 1.0);
  // Keep every L1 residual well away from zero so central differences never straddle the kink.
  auto target = net.forward(params, input);
  {
    Rng offsets(seed + 2);
    std::uniform_real_distribution<double> mag(0.1, 0.5);
    std::bernoulli_distribution flip(0.5);
    for (auto& v : target.data) v += flip(offsets) ? mag(offsets) : -mag(offsets);
  }
  auto loss = [&](const std::vector<double>& p) {
    const auto out = net.forward(p, input);
    double acc = 0.0;
    for (std::size_t i = 0; i < out.data.size(); ++i) acc += std::abs(out.data[i] - target.data[i]);
    return acc / static_cast<double>(out.data.size());
  };

  ForwardCache<double> cache;
  const auto out = net.forward(params, input, &cache);
  Tensor<double> dout = out.zeros_like();
  const double n = static_cast<double>(out.data.size());
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double d = out.data[i] - target.data[i];
    dout.data[i] = (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) / n;
  }
  std::vector<double> grads(params.size(), 0.0);
  net.backward(params, cache, dout, grads);

  GradientCheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + step;
    const double up = loss(params);
    params[i] = saved - step;
    const double down = loss(params);
    params[i] = saved;
    const double numeric = (up - down) / (2 * step);
    const double diff = std::abs(numeric - grads[i]);
    const double scale = std::max(std::abs(numeric), std::abs(grads[i]));
    ++report.checked;
    if (diff > abs_floor) {
      const double rel = diff / scale;
      report.worst_relative = std::max(report.worst_relative, rel);
      if (rel > rel_tol) ++report.failures;
    }
  }
  return report;
}

}  // namespace srmix::testing
