#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "srmix/image.hpp"
#include "srmix/layers.hpp"
#include "srmix/rng.hpp"
#include "srmix/tensor.hpp"

namespace srmix {

struct ModelConfig {
  int base_channels = 64;
  int num_cascading_blocks = 4;
  int rcabs_per_block = 4;
  int attention_reduction = 16;
  /// output = tail + input
  bool global_skip = true;
  /// Encoder features added to the decoder at full and half resolution.
  bool unet_skips = true;

  /// Two stride-2 stages; inputs must be divisible by this.
  static constexpr int kInternalScale = 4;

  /// Throws InvalidConfig.
  void validate() const;
  std::string describe() const;

  bool operator==(const ModelConfig&) const = default;
};

struct ParamInfo {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t count = 0;
};

struct ConvSlot {
  std::size_t weight = 0;
  std::size_t bias = 0;
  ConvShape shape;
};

struct RcabSlots {
  ConvSlot conv1;
  ConvSlot conv2;
  ConvSlot squeeze;
  ConvSlot excite;
};

/// One cascading block: RCABs plus a 1x1 fusion after each of them.
struct CascadeSlots {
  std::vector<RcabSlots> rcabs;
  std::vector<ConvSlot> fuse;
};

/// Deterministic parameter inventory derived from a ModelConfig. All
/// parameters live in one flat buffer; slots hold offsets into it.
class NetworkLayout {
 public:
  explicit NetworkLayout(const ModelConfig& config);

  const ModelConfig& config() const noexcept { return config_; }
  const std::vector<ParamInfo>& inventory() const noexcept { return inventory_; }
  std::size_t parameter_count() const noexcept { return total_; }

  ConvSlot head;
  ConvSlot down1;
  ConvSlot down2;
  std::vector<CascadeSlots> blocks;
  std::vector<ConvSlot> global_fuse;
  ConvSlot up1;
  ConvSlot up2;
  ConvSlot tail;

 private:
  ConvSlot add_conv(const std::string& name, ConvShape shape);

  ModelConfig config_;
  std::vector<ParamInfo> inventory_;
  std::size_t total_ = 0;
};

std::size_t count_parameters(const ModelConfig& config);

/// Parameter set of f (LR -> HR) or g (HR -> LR); both share the layout.
struct ModelWeights {
  ModelConfig config;
  std::vector<float> values;

  bool operator==(const ModelWeights&) const = default;
};

/// Convolution kernels ~ N(0, 2 / fan_in), biases zero.
ModelWeights init_weights(const ModelConfig& config, Rng& rng);

/// Weights for which the network computes the identity map.
ModelWeights identity_weights(const ModelConfig& config);

template <typename T>
struct RcabCache {
  Tensor<T> hidden_pre;  // conv1 output, before ReLU
  Tensor<T> branch;      // conv2 output
  AttentionCache<T> attention;
};

template <typename T>
struct CascadeCache {
  std::vector<Tensor<T>> features;  // input, then each unit's output
  std::vector<Tensor<T>> fused;     // each fusion output
  std::vector<RcabCache<T>> rcabs;  // local cascades only
  std::vector<CascadeCache<T>> blocks;  // global cascade only
};

template <typename T>
struct ForwardCache {
  Tensor<T> input;
  Tensor<T> head;
  Tensor<T> down1;
  Tensor<T> down2;
  CascadeCache<T> body;
  Tensor<T> up1;
  Tensor<T> up2;
};

/// The cascading U-Net: head conv, two stride-2 convs down to 1/4 resolution,
/// globally cascaded blocks of locally cascaded RCABs, two conv + pixel
/// shuffle stages back up, tail conv and the global input skip.
template <typename T>
class UNet {
 public:
  explicit UNet(const ModelConfig& config);

  const NetworkLayout& layout() const noexcept { return layout_; }

  /// Raw (unclamped) output. Fills `cache` when non-null.
  Tensor<T> forward(std::span<const T> params, const Tensor<T>& input,
                    ForwardCache<T>* cache = nullptr) const;

  /// Accumulates dLoss/dparams into grads.
  void backward(std::span<const T> params, const ForwardCache<T>& cache,
                const Tensor<T>& grad_output, std::span<T> grads) const;

  Tensor<T> rcab_forward(std::span<const T> params, const RcabSlots& slots, const Tensor<T>& x,
                         RcabCache<T>* cache = nullptr) const;
  /// Returns dLoss/dx; accumulates parameter gradients.
  Tensor<T> rcab_backward(std::span<const T> params, const RcabSlots& slots, const Tensor<T>& x,
                          const RcabCache<T>& cache, const Tensor<T>& dout,
                          std::span<T> grads) const;

  Tensor<T> cascading_block_forward(std::span<const T> params, const CascadeSlots& slots,
                                    const Tensor<T>& x, CascadeCache<T>* cache = nullptr) const;
  Tensor<T> cascading_block_backward(std::span<const T> params, const CascadeSlots& slots,
                                     const CascadeCache<T>& cache, const Tensor<T>& dout,
                                     std::span<T> grads) const;

  AttentionParams<T> attention_params(std::span<const T> params, const RcabSlots& slots) const;

 private:
  NetworkLayout layout_;
};

/// Runs the network on one image and clamps the result to [0,1].
/// Throws NotDivisible when the image is not a multiple of 4 on both axes.
ImageBuffer unet_forward(const ImageBuffer& input, const ModelWeights& weights);
ImageBuffer unet_forward(const ImageBuffer& input, const ModelConfig& config,
                         std::span<const float> params);

/// Converts the stored float weights to another precision.
template <typename T>
std::vector<T> cast_parameters(const ModelWeights& weights);

}  // namespace srmix
