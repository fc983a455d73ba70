#include "srmix/model.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "srmix/error.hpp"

namespace srmix {

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (base_channels < 1) fail("base_channels must be >= 1");
  if (num_cascading_blocks < 1) fail("num_cascading_blocks must be >= 1");
  if (rcabs_per_block < 1) fail("rcabs_per_block must be >= 1");
  if (attention_reduction < 1) fail("attention_reduction must be >= 1");
  if (base_channels % attention_reduction != 0) {
    fail("base_channels (" + std::to_string(base_channels) +
         ") must be divisible by attention_reduction (" + std::to_string(attention_reduction) + ")");
  }
}

std::string ModelConfig::describe() const {
  std::ostringstream out;
  out << "c" << base_channels << "-b" << num_cascading_blocks << "-r" << rcabs_per_block << "-a"
      << attention_reduction << (global_skip ? "-gs" : "") << (unet_skips ? "-us" : "");
  return out.str();
}

NetworkLayout::NetworkLayout(const ModelConfig& config) : config_(config) {
  config.validate();
  const int c = config.base_channels;
  const int reduced = c / config.attention_reduction;
  head = add_conv("head", {3, c, 3, 1});
  down1 = add_conv("down1", {c, c, 3, 2});
  down2 = add_conv("down2", {c, c, 3, 2});
  for (int b = 0; b < config.num_cascading_blocks; ++b) {
    CascadeSlots block;
    const std::string prefix = "body." + std::to_string(b);
    for (int r = 0; r < config.rcabs_per_block; ++r) {
      const std::string rp = prefix + ".rcab." + std::to_string(r);
      RcabSlots rcab;
      rcab.conv1 = add_conv(rp + ".conv1", {c, c, 3, 1});
      rcab.conv2 = add_conv(rp + ".conv2", {c, c, 3, 1});
      rcab.squeeze = add_conv(rp + ".attention.squeeze", {c, reduced, 1, 1});
      rcab.excite = add_conv(rp + ".attention.excite", {reduced, c, 1, 1});
      block.rcabs.push_back(rcab);
      block.fuse.push_back(add_conv(prefix + ".fuse." + std::to_string(r), {(r + 2) * c, c, 1, 1}));
    }
    blocks.push_back(std::move(block));
    global_fuse.push_back(add_conv("global_fuse." + std::to_string(b), {(b + 2) * c, c, 1, 1}));
  }
  up1 = add_conv("up1", {c, 4 * c, 3, 1});
  up2 = add_conv("up2", {c, 4 * c, 3, 1});
  tail = add_conv("tail", {c, 3, 3, 1});
}

ConvSlot NetworkLayout::add_conv(const std::string& name, ConvShape shape) {
  ConvSlot slot;
  slot.shape = shape;
  slot.weight = total_;
  inventory_.push_back({name + ".weight",
                        {shape.out_channels, shape.in_channels, shape.kernel, shape.kernel},
                        total_,
                        shape.weight_count()});
  total_ += shape.weight_count();
  slot.bias = total_;
  inventory_.push_back({name + ".bias", {shape.out_channels}, total_, shape.bias_count()});
  total_ += shape.bias_count();
  return slot;
}

std::size_t count_parameters(const ModelConfig& config) {
  return NetworkLayout(config).parameter_count();
}

ModelWeights init_weights(const ModelConfig& config, Rng& rng) {
  const NetworkLayout layout(config);
  ModelWeights weights{config, std::vector<float>(layout.parameter_count(), 0.0f)};
  for (const ParamInfo& p : layout.inventory()) {
    if (p.shape.size() != 4) continue;  // biases stay zero
    const double fan_in = static_cast<double>(p.shape[1]) * p.shape[2] * p.shape[3];
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
    for (std::size_t i = 0; i < p.count; ++i) {
      weights.values[p.offset + i] = static_cast<float>(normal(rng));
    }
  }
  return weights;
}

ModelWeights identity_weights(const ModelConfig& config) {
  if (!config.global_skip) {
    throw Error(ErrorCode::InvalidConfig, "identity weights need the global skip connection");
  }
  const NetworkLayout layout(config);
  ModelWeights weights{config, std::vector<float>(layout.parameter_count(), 0.0f)};
  const int c = config.base_channels;
  auto route_input = [&](const ConvSlot& fuse) {
    const int in = fuse.shape.in_channels;
    for (int o = 0; o < c; ++o) weights.values[fuse.weight + static_cast<std::size_t>(o) * in + o] = 1.0f;
  };
  for (const auto& block : layout.blocks) {
    for (const auto& fuse : block.fuse) route_input(fuse);
  }
  for (const auto& fuse : layout.global_fuse) route_input(fuse);
  return weights;
}

template <typename T>
std::vector<T> cast_parameters(const ModelWeights& weights) {
  return std::vector<T>(weights.values.begin(), weights.values.end());
}

namespace {

template <typename T>
void conv(std::span<const T> params, const ConvSlot& slot, const Tensor<T>& x, Tensor<T>& y) {
  conv2d_forward<T>(x, params.subspan(slot.weight, slot.shape.weight_count()),
                    params.subspan(slot.bias, slot.shape.bias_count()), slot.shape, y);
}

template <typename T>
void conv_backward(std::span<const T> params, const ConvSlot& slot, const Tensor<T>& x,
                   const Tensor<T>& dy, Tensor<T>* dx, std::span<T> grads) {
  conv2d_backward<T>(x, params.subspan(slot.weight, slot.shape.weight_count()), slot.shape, dy, dx,
                     grads.subspan(slot.weight, slot.shape.weight_count()),
                     grads.subspan(slot.bias, slot.shape.bias_count()));
}

template <typename T>
void fuse(std::span<const T> params, const ConvSlot& slot, const std::vector<Tensor<T>>& features,
          std::size_t count, Tensor<T>& y) {
  std::vector<const Tensor<T>*> inputs;
  for (std::size_t i = 0; i < count; ++i) inputs.push_back(&features[i]);
  fuse_forward<T>(inputs, params.subspan(slot.weight, slot.shape.weight_count()),
                  params.subspan(slot.bias, slot.shape.bias_count()), slot.shape.out_channels, y);
}

// Back-propagates through a cascade: unit k reads (k == 0 ? features[0] :
// fused[k-1]) and fusion k reads features[0..k+1].
template <typename T, typename UnitBackward>
Tensor<T> cascade_backward(std::span<const T> params, const std::vector<ConvSlot>& fuse_slots,
                           const CascadeCache<T>& cache, const Tensor<T>& dout,
                           std::span<T> grads, UnitBackward unit_backward) {
  const std::size_t units = fuse_slots.size();
  std::vector<Tensor<T>> dfeatures;
  dfeatures.reserve(units + 1);
  for (std::size_t i = 0; i <= units; ++i) dfeatures.push_back(cache.features[0].zeros_like());

  Tensor<T> dcur = dout;
  for (std::size_t k = units; k-- > 0;) {
    const ConvSlot& slot = fuse_slots[k];
    std::vector<const Tensor<T>*> inputs;
    std::vector<Tensor<T>*> dinputs;
    for (std::size_t i = 0; i <= k + 1; ++i) {
      inputs.push_back(&cache.features[i]);
      dinputs.push_back(&dfeatures[i]);
    }
    fuse_backward<T>(inputs, params.subspan(slot.weight, slot.shape.weight_count()),
                     slot.shape.out_channels, dcur, dinputs,
                     grads.subspan(slot.weight, slot.shape.weight_count()),
                     grads.subspan(slot.bias, slot.shape.bias_count()));
    Tensor<T> din = unit_backward(k, dfeatures[k + 1]);
    if (k == 0) {
      as_matrix(dfeatures[0]) += as_matrix(din);
    } else {
      dcur = std::move(din);
    }
  }
  return std::move(dfeatures[0]);
}

}  // namespace

template <typename T>
UNet<T>::UNet(const ModelConfig& config) : layout_(config) {}

template <typename T>
AttentionParams<T> UNet<T>::attention_params(std::span<const T> params,
                                             const RcabSlots& slots) const {
  AttentionParams<T> p;
  p.squeeze_weight = params.subspan(slots.squeeze.weight, slots.squeeze.shape.weight_count());
  p.squeeze_bias = params.subspan(slots.squeeze.bias, slots.squeeze.shape.bias_count());
  p.excite_weight = params.subspan(slots.excite.weight, slots.excite.shape.weight_count());
  p.excite_bias = params.subspan(slots.excite.bias, slots.excite.shape.bias_count());
  p.channels = slots.squeeze.shape.in_channels;
  p.reduced = slots.squeeze.shape.out_channels;
  return p;
}

template <typename T>
Tensor<T> UNet<T>::rcab_forward(std::span<const T> params, const RcabSlots& slots,
                                const Tensor<T>& x, RcabCache<T>* cache) const {
  RcabCache<T> local;
  RcabCache<T>& c = cache ? *cache : local;
  conv(params, slots.conv1, x, c.hidden_pre);
  Tensor<T> hidden = c.hidden_pre;
  for (T& v : hidden.data) v = v > T(0) ? v : T(0);
  conv(params, slots.conv2, hidden, c.branch);
  channel_attention_forward(c.branch, attention_params(params, slots), c.attention);

  Tensor<T> out = x;
  const std::size_t hw = x.spatial();
  for (int ch = 0; ch < out.channels; ++ch) {
    T* dst = out.channel(ch);
    const T* branch = c.branch.channel(ch);
    for (int n = 0; n < out.batch; ++n) {
      const T s = c.attention.scale(ch, n);
      for (std::size_t i = n * hw; i < (n + 1) * hw; ++i) dst[i] += s * branch[i];
    }
  }
  return out;
}

template <typename T>
Tensor<T> UNet<T>::rcab_backward(std::span<const T> params, const RcabSlots& slots,
                                 const Tensor<T>& x, const RcabCache<T>& cache,
                                 const Tensor<T>& dout, std::span<T> grads) const {
  Tensor<T> dx = dout;
  Tensor<T> dbranch = dout.zeros_like();
  MatrixRM<T> dscale(dout.channels, dout.batch);
  const std::size_t hw = dout.spatial();
  for (int ch = 0; ch < dout.channels; ++ch) {
    const T* g = dout.channel(ch);
    const T* branch = cache.branch.channel(ch);
    T* db = dbranch.channel(ch);
    for (int n = 0; n < dout.batch; ++n) {
      const T s = cache.attention.scale(ch, n);
      T acc = 0;
      for (std::size_t i = n * hw; i < (n + 1) * hw; ++i) {
        db[i] = g[i] * s;
        acc += g[i] * branch[i];
      }
      dscale(ch, n) = acc;
    }
  }
  AttentionGrads<T> ag{grads.subspan(slots.squeeze.weight, slots.squeeze.shape.weight_count()),
                       grads.subspan(slots.squeeze.bias, slots.squeeze.shape.bias_count()),
                       grads.subspan(slots.excite.weight, slots.excite.shape.weight_count()),
                       grads.subspan(slots.excite.bias, slots.excite.shape.bias_count())};
  channel_attention_backward(cache.branch, attention_params(params, slots), cache.attention,
                             dscale, dbranch, ag);

  Tensor<T> hidden = cache.hidden_pre;
  for (T& v : hidden.data) v = v > T(0) ? v : T(0);
  Tensor<T> dhidden = hidden.zeros_like();
  conv_backward(params, slots.conv2, hidden, dbranch, &dhidden, grads);
  for (std::size_t i = 0; i < dhidden.data.size(); ++i) {
    if (!(cache.hidden_pre.data[i] > T(0))) dhidden.data[i] = T(0);
  }
  conv_backward(params, slots.conv1, x, dhidden, &dx, grads);
  return dx;
}

template <typename T>
Tensor<T> UNet<T>::cascading_block_forward(std::span<const T> params, const CascadeSlots& slots,
                                           const Tensor<T>& x, CascadeCache<T>* cache) const {
  CascadeCache<T> local;
  CascadeCache<T>& c = cache ? *cache : local;
  const std::size_t units = slots.rcabs.size();
  c.features.assign(1, x);
  c.fused.assign(units, Tensor<T>());
  c.rcabs.assign(units, RcabCache<T>());
  for (std::size_t k = 0; k < units; ++k) {
    const Tensor<T>& in = k == 0 ? c.features[0] : c.fused[k - 1];
    c.features.push_back(rcab_forward(params, slots.rcabs[k], in, &c.rcabs[k]));
    fuse(params, slots.fuse[k], c.features, k + 2, c.fused[k]);
  }
  return c.fused.back();
}

template <typename T>
Tensor<T> UNet<T>::cascading_block_backward(std::span<const T> params, const CascadeSlots& slots,
                                            const CascadeCache<T>& cache, const Tensor<T>& dout,
                                            std::span<T> grads) const {
  return cascade_backward<T>(params, slots.fuse, cache, dout, grads,
                             [&](std::size_t k, const Tensor<T>& dunit) {
                               const Tensor<T>& in = k == 0 ? cache.features[0] : cache.fused[k - 1];
                               return rcab_backward(params, slots.rcabs[k], in, cache.rcabs[k],
                                                    dunit, grads);
                             });
}

template <typename T>
Tensor<T> UNet<T>::forward(std::span<const T> params, const Tensor<T>& input,
                           ForwardCache<T>* cache) const {
  if (params.size() != layout_.parameter_count()) {
    throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(layout_.parameter_count()) +
                                              " parameters, got " + std::to_string(params.size()));
  }
  if (input.channels != 3) throw Error(ErrorCode::ShapeMismatch, "input must have 3 channels");
  constexpr int s = ModelConfig::kInternalScale;
  if (input.height % s != 0 || input.width % s != 0) {
    throw Error(ErrorCode::NotDivisible, "input " + std::to_string(input.height) + "x" +
                                             std::to_string(input.width) +
                                             " is not divisible by 4");
  }
  ForwardCache<T> local;
  ForwardCache<T>& c = cache ? *cache : local;
  const ModelConfig& cfg = layout_.config();

  c.input = input;
  conv(params, layout_.head, input, c.head);
  conv(params, layout_.down1, c.head, c.down1);
  conv(params, layout_.down2, c.down1, c.down2);

  CascadeCache<T>& body = c.body;
  const std::size_t blocks = layout_.blocks.size();
  body.features.assign(1, c.down2);
  body.fused.assign(blocks, Tensor<T>());
  body.blocks.assign(blocks, CascadeCache<T>());
  for (std::size_t b = 0; b < blocks; ++b) {
    const Tensor<T>& in = b == 0 ? body.features[0] : body.fused[b - 1];
    body.features.push_back(cascading_block_forward(params, layout_.blocks[b], in, &body.blocks[b]));
    fuse(params, layout_.global_fuse[b], body.features, b + 2, body.fused[b]);
  }

  Tensor<T> pre;
  conv(params, layout_.up1, body.fused.back(), pre);
  c.up1 = pixel_shuffle(pre, 2);
  if (cfg.unet_skips) as_matrix(c.up1) += as_matrix(c.down1);
  conv(params, layout_.up2, c.up1, pre);
  c.up2 = pixel_shuffle(pre, 2);
  if (cfg.unet_skips) as_matrix(c.up2) += as_matrix(c.head);

  Tensor<T> out;
  conv(params, layout_.tail, c.up2, out);
  if (cfg.global_skip) as_matrix(out) += as_matrix(input);
  return out;
}

template <typename T>
void UNet<T>::backward(std::span<const T> params, const ForwardCache<T>& c,
                       const Tensor<T>& grad_output, std::span<T> grads) const {
  if (grads.size() != layout_.parameter_count()) {
    throw Error(ErrorCode::ShapeMismatch, "gradient buffer size mismatch");
  }
  const ModelConfig& cfg = layout_.config();

  Tensor<T> dup2 = c.up2.zeros_like();
  conv_backward(params, layout_.tail, c.up2, grad_output, &dup2, grads);
  Tensor<T> dhead = cfg.unet_skips ? dup2 : c.head.zeros_like();

  Tensor<T> dup1 = c.up1.zeros_like();
  conv_backward(params, layout_.up2, c.up1, pixel_unshuffle(dup2, 2), &dup1, grads);
  Tensor<T> ddown1 = cfg.unet_skips ? dup1 : c.down1.zeros_like();

  const Tensor<T>& body_out = c.body.fused.back();
  Tensor<T> dbody = body_out.zeros_like();
  conv_backward(params, layout_.up1, body_out, pixel_unshuffle(dup1, 2), &dbody, grads);

  const Tensor<T> ddown2 = cascade_backward<T>(
      params, layout_.global_fuse, c.body, dbody, grads,
      [&](std::size_t b, const Tensor<T>& dblock) {
        return cascading_block_backward(params, layout_.blocks[b], c.body.blocks[b], dblock, grads);
      });

  conv_backward(params, layout_.down2, c.down1, ddown2, &ddown1, grads);
  conv_backward(params, layout_.down1, c.head, ddown1, &dhead, grads);
  conv_backward(params, layout_.head, c.input, dhead, static_cast<Tensor<T>*>(nullptr), grads);
}

ImageBuffer unet_forward(const ImageBuffer& input, const ModelWeights& weights) {
  return unet_forward(input, weights.config, weights.values);
}

ImageBuffer unet_forward(const ImageBuffer& input, const ModelConfig& config,
                         std::span<const float> params) {
  const UNet<float> net(config);
  const std::vector<ImageBuffer> batch{input};
  const Tensor<float> out = net.forward(params, images_to_tensor<float>(batch));
  ImageBuffer image = tensor_to_image(out, 0);
  image.clamp();
  return image;
}

template class UNet<float>;
template class UNet<double>;
template std::vector<float> cast_parameters<float>(const ModelWeights&);
template std::vector<double> cast_parameters<double>(const ModelWeights&);

}  // namespace srmix
