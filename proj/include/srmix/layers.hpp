#pragma once

#include <span>
#include <vector>

#include "srmix/tensor.hpp"

namespace srmix {

/// Square convolution with zero padding kernel/2. Weights are stored
/// [out][in][k][k], biases [out].
struct ConvShape {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;

  std::size_t weight_count() const noexcept {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel;
  }
  std::size_t bias_count() const noexcept { return static_cast<std::size_t>(out_channels); }
  int output_extent(int extent) const noexcept {
    return (extent + 2 * (kernel / 2) - kernel) / stride + 1;
  }

  bool operator==(const ConvShape&) const = default;
};

template <typename T>
void conv2d_forward(const Tensor<T>& x, std::span<const T> weight, std::span<const T> bias,
                    const ConvShape& shape, Tensor<T>& y);

/// Accumulates into dweight/dbias and, when dx is non-null, into *dx.
template <typename T>
void conv2d_backward(const Tensor<T>& x, std::span<const T> weight, const ConvShape& shape,
                     const Tensor<T>& dy, Tensor<T>* dx, std::span<T> dweight, std::span<T> dbias);

/// 1x1 convolution over the channel concatenation of `inputs` (all with the
/// same channel count), without materialising the concatenation.
template <typename T>
void fuse_forward(const std::vector<const Tensor<T>*>& inputs, std::span<const T> weight,
                  std::span<const T> bias, int out_channels, Tensor<T>& y);

template <typename T>
void fuse_backward(const std::vector<const Tensor<T>*>& inputs, std::span<const T> weight,
                   int out_channels, const Tensor<T>& dy, const std::vector<Tensor<T>*>& dinputs,
                   std::span<T> dweight, std::span<T> dbias);

/// output(c, y, x) = input(c*r*r + (y mod r)*r + (x mod r), y / r, x / r).
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int r);

template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& y, int r);

/// Parameters of the squeeze/excite gate of a residual channel-attention
/// block: squeeze [reduced][C] + bias, excite [C][reduced] + bias.
template <typename T>
struct AttentionParams {
  std::span<const T> squeeze_weight;
  std::span<const T> squeeze_bias;
  std::span<const T> excite_weight;
  std::span<const T> excite_bias;
  int channels = 0;
  int reduced = 0;
};

template <typename T>
struct AttentionGrads {
  std::span<T> squeeze_weight;
  std::span<T> squeeze_bias;
  std::span<T> excite_weight;
  std::span<T> excite_bias;
};

/// Intermediates of the gate, each stored channel-major (rows) x batch (cols).
template <typename T>
struct AttentionCache {
  MatrixRM<T> pooled;       // C x N
  MatrixRM<T> hidden_pre;   // reduced x N, before ReLU
  MatrixRM<T> scale;        // C x N, in (0, 1)
};

/// Global average pool -> 1x1 squeeze -> ReLU -> 1x1 excite -> sigmoid.
template <typename T>
void channel_attention_forward(const Tensor<T>& features, const AttentionParams<T>& params,
                               AttentionCache<T>& cache);

/// Back-propagates d(scale) (C x N) into the features and the gate params.
template <typename T>
void channel_attention_backward(const Tensor<T>& features, const AttentionParams<T>& params,
                                const AttentionCache<T>& cache, const MatrixRM<T>& dscale,
                                Tensor<T>& dfeatures, const AttentionGrads<T>& grads);

}  // namespace srmix
