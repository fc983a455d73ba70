#include "srmix/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "srmix/error.hpp"

namespace srmix {

template <typename T>
Tensor<T> images_to_tensor(std::span<const ImageBuffer> images) {
  if (images.empty()) throw Error(ErrorCode::ShapeMismatch, "no images to pack");
  const int h = images.front().height();
  const int w = images.front().width();
  Tensor<T> t(3, static_cast<int>(images.size()), h, w);
  for (int n = 0; n < t.batch; ++n) {
    const ImageBuffer& img = images[n];
    if (img.height() != h || img.width() != w) {
      throw Error(ErrorCode::ShapeMismatch, "batch images differ in size");
    }
    const auto s = img.samples();
    for (int c = 0; c < 3; ++c) {
      T* dst = t.channel(c) + n * t.spatial();
      for (std::size_t i = 0; i < t.spatial(); ++i) dst[i] = static_cast<T>(s[i * 3 + c]);
    }
  }
  return t;
}

template <typename T>
ImageBuffer tensor_to_image(const Tensor<T>& t, int index) {
  if (t.channels != 3 || index < 0 || index >= t.batch) {
    throw Error(ErrorCode::ShapeMismatch, "tensor is not a 3-channel batch");
  }
  ImageBuffer img(t.height, t.width);
  auto s = img.samples();
  for (int c = 0; c < 3; ++c) {
    const T* src = t.channel(c) + index * t.spatial();
    for (std::size_t i = 0; i < t.spatial(); ++i) s[i * 3 + c] = static_cast<float>(src[i]);
  }
  return img;
}

namespace {

template <typename T>
std::vector<T>& scratch_buffer() {
  thread_local std::vector<T> buffer;
  return buffer;
}

template <typename T>
std::vector<T>& scratch_buffer2() {
  thread_local std::vector<T> buffer;
  return buffer;
}

void check_conv_input(int channels, const ConvShape& shape) {
  if (channels != shape.in_channels) {
    throw Error(ErrorCode::ShapeMismatch, "conv expects " + std::to_string(shape.in_channels) +
                                              " channels, got " + std::to_string(channels));
  }
}

// Output columns [lo, hi) whose input column ox*stride + offset is inside [0, width).
inline void valid_range(int ow, int stride, int offset, int width, int& lo, int& hi) {
  lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  hi = width - offset <= 0 ? 0 : std::min(ow, (width - offset + stride - 1) / stride);
  lo = std::min(lo, hi);
}

// Rows: (ci, ky, kx); columns: (n, oy, ox).
template <typename T>
void im2col(const Tensor<T>& x, const ConvShape& s, int oh, int ow, T* col) {
  const int k = s.kernel;
  const int pad = k / 2;
  const int st = s.stride;
  const std::size_t cols = static_cast<std::size_t>(x.batch) * oh * ow;
  for (int ci = 0; ci < x.channels; ++ci) {
    const T* src_c = x.channel(ci);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * cols;
        const int offset = kx - pad;
        int lo = 0;
        int hi = 0;
        valid_range(ow, st, offset, x.width, lo, hi);
        for (int n = 0; n < x.batch; ++n) {
          const T* src = src_c + n * x.spatial();
          for (int oy = 0; oy < oh; ++oy) {
            T* dst = row + (static_cast<std::size_t>(n) * oh + oy) * ow;
            const int iy = oy * st + ky - pad;
            if (iy < 0 || iy >= x.height) {
              std::fill_n(dst, ow, T(0));
              continue;
            }
            const T* line = src + static_cast<std::ptrdiff_t>(iy) * x.width + offset;
            std::fill(dst, dst + lo, T(0));
            if (st == 1) {
              std::copy(line + lo, line + hi, dst + lo);
            } else {
              for (int ox = lo; ox < hi; ++ox) dst[ox] = line[ox * st];
            }
            std::fill(dst + hi, dst + ow, T(0));
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvShape& s, int oh, int ow, Tensor<T>& dx) {
  const int k = s.kernel;
  const int pad = k / 2;
  const int st = s.stride;
  const std::size_t cols = static_cast<std::size_t>(dx.batch) * oh * ow;
  for (int ci = 0; ci < dx.channels; ++ci) {
    T* dst_c = dx.channel(ci);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * cols;
        const int offset = kx - pad;
        int lo = 0;
        int hi = 0;
        valid_range(ow, st, offset, dx.width, lo, hi);
        for (int n = 0; n < dx.batch; ++n) {
          T* dst = dst_c + n * dx.spatial();
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * st + ky - pad;
            if (iy < 0 || iy >= dx.height) continue;
            const T* src = row + (static_cast<std::size_t>(n) * oh + oy) * ow;
            T* line = dst + static_cast<std::ptrdiff_t>(iy) * dx.width + offset;
            if (st == 1) {
              for (int ox = lo; ox < hi; ++ox) line[ox] += src[ox];
            } else {
              for (int ox = lo; ox < hi; ++ox) line[ox * st] += src[ox];
            }
          }
        }
      }
    }
  }
}

// Row sums with a fixed summation order. Eigen's vectorised reductions peel
// by address alignment, which would make results depend on where a buffer
// happens to live.
template <typename M>
void add_row_sums(const M& m, typename M::Scalar* out) {
  using T = typename M::Scalar;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const T* row = &m.coeffRef(r, 0);
    T acc = T(0);
    for (Eigen::Index c = 0; c < m.cols(); ++c) acc += row[c];
    out[r] += acc;
  }
}

template <typename T>
using ConstVecMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using VecMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;

}  // namespace

template <typename T>
void conv2d_forward(const Tensor<T>& x, std::span<const T> weight, std::span<const T> bias,
                    const ConvShape& shape, Tensor<T>& y) {
  check_conv_input(x.channels, shape);
  const int oh = shape.output_extent(x.height);
  const int ow = shape.output_extent(x.width);
  y = Tensor<T>(shape.out_channels, x.batch, oh, ow);
  const Eigen::Index k = static_cast<Eigen::Index>(shape.in_channels) * shape.kernel * shape.kernel;
  const Eigen::Index cols = static_cast<Eigen::Index>(y.plane());
  Eigen::Map<const MatrixRM<T>> w(weight.data(), shape.out_channels, k);
  auto out = as_matrix(y);
  if (shape.kernel == 1 && shape.stride == 1) {
    out.noalias() = w * as_matrix(x);
  } else {
    auto& col = scratch_buffer<T>();
    col.resize(static_cast<std::size_t>(k) * cols);
    im2col(x, shape, oh, ow, col.data());
    out.noalias() = w * Eigen::Map<const MatrixRM<T>>(col.data(), k, cols);
  }
  out.colwise() += ConstVecMap<T>(bias.data(), shape.out_channels);
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, std::span<const T> weight, const ConvShape& shape,
                     const Tensor<T>& dy, Tensor<T>* dx, std::span<T> dweight, std::span<T> dbias) {
  check_conv_input(x.channels, shape);
  const int oh = dy.height;
  const int ow = dy.width;
  const Eigen::Index k = static_cast<Eigen::Index>(shape.in_channels) * shape.kernel * shape.kernel;
  const Eigen::Index cols = static_cast<Eigen::Index>(dy.plane());
  Eigen::Map<const MatrixRM<T>> w(weight.data(), shape.out_channels, k);
  Eigen::Map<MatrixRM<T>> dw(dweight.data(), shape.out_channels, k);
  const auto g = as_matrix(dy);
  add_row_sums(g, dbias.data());

  if (shape.kernel == 1 && shape.stride == 1) {
    dw.noalias() += g * as_matrix(x).transpose();
    if (dx) as_matrix(*dx).noalias() += w.transpose() * g;
    return;
  }
  auto& col = scratch_buffer<T>();
  col.resize(static_cast<std::size_t>(k) * cols);
  im2col(x, shape, oh, ow, col.data());
  dw.noalias() += g * Eigen::Map<const MatrixRM<T>>(col.data(), k, cols).transpose();
  if (dx) {
    auto& dcol = scratch_buffer2<T>();
    dcol.resize(static_cast<std::size_t>(k) * cols);
    Eigen::Map<MatrixRM<T>>(dcol.data(), k, cols).noalias() = w.transpose() * g;
    col2im_add(dcol.data(), shape, oh, ow, *dx);
  }
}

template <typename T>
void fuse_forward(const std::vector<const Tensor<T>*>& inputs, std::span<const T> weight,
                  std::span<const T> bias, int out_channels, Tensor<T>& y) {
  const Tensor<T>& first = *inputs.front();
  const Eigen::Index c = first.channels;
  const Eigen::Index total = c * static_cast<Eigen::Index>(inputs.size());
  y = Tensor<T>(out_channels, first.batch, first.height, first.width);
  Eigen::Map<const MatrixRM<T>> w(weight.data(), out_channels, total);
  auto out = as_matrix(y);
  for (std::size_t g = 0; g < inputs.size(); ++g) {
    if (!inputs[g]->same_shape(first)) throw Error(ErrorCode::ShapeMismatch, "fuse inputs differ");
    out.noalias() += w.middleCols(static_cast<Eigen::Index>(g) * c, c) * as_matrix(*inputs[g]);
  }
  out.colwise() += ConstVecMap<T>(bias.data(), out_channels);
}

template <typename T>
void fuse_backward(const std::vector<const Tensor<T>*>& inputs, std::span<const T> weight,
                   int out_channels, const Tensor<T>& dy, const std::vector<Tensor<T>*>& dinputs,
                   std::span<T> dweight, std::span<T> dbias) {
  const Eigen::Index c = inputs.front()->channels;
  const Eigen::Index total = c * static_cast<Eigen::Index>(inputs.size());
  Eigen::Map<const MatrixRM<T>> w(weight.data(), out_channels, total);
  Eigen::Map<MatrixRM<T>> dw(dweight.data(), out_channels, total);
  const auto g = as_matrix(dy);
  add_row_sums(g, dbias.data());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Eigen::Index off = static_cast<Eigen::Index>(i) * c;
    dw.middleCols(off, c).noalias() += g * as_matrix(*inputs[i]).transpose();
    if (dinputs[i]) as_matrix(*dinputs[i]).noalias() += w.middleCols(off, c).transpose() * g;
  }
}

template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int r) {
  if (r < 1 || x.channels % (r * r) != 0) {
    throw Error(ErrorCode::NotDivisible, "channels " + std::to_string(x.channels) +
                                             " not divisible by r^2 = " + std::to_string(r * r));
  }
  Tensor<T> y(x.channels / (r * r), x.batch, x.height * r, x.width * r);
  for (int c = 0; c < y.channels; ++c) {
    for (int n = 0; n < y.batch; ++n) {
      for (int oy = 0; oy < y.height; ++oy) {
        for (int ox = 0; ox < y.width; ++ox) {
          y.at(c, n, oy, ox) = x.at(c * r * r + (oy % r) * r + (ox % r), n, oy / r, ox / r);
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& y, int r) {
  if (r < 1 || y.height % r != 0 || y.width % r != 0) {
    throw Error(ErrorCode::NotDivisible, "spatial size not divisible by " + std::to_string(r));
  }
  Tensor<T> x(y.channels * r * r, y.batch, y.height / r, y.width / r);
  for (int c = 0; c < y.channels; ++c) {
    for (int n = 0; n < y.batch; ++n) {
      for (int oy = 0; oy < y.height; ++oy) {
        for (int ox = 0; ox < y.width; ++ox) {
          x.at(c * r * r + (oy % r) * r + (ox % r), n, oy / r, ox / r) = y.at(c, n, oy, ox);
        }
      }
    }
  }
  return x;
}

template <typename T>
void channel_attention_forward(const Tensor<T>& features, const AttentionParams<T>& p,
                               AttentionCache<T>& cache) {
  if (features.channels != p.channels || p.reduced < 1 || p.channels % p.reduced != 0) {
    throw Error(ErrorCode::NotDivisible, "attention channels/reduction mismatch");
  }
  const int c = features.channels;
  const int n = features.batch;
  const std::size_t hw = features.spatial();
  cache.pooled.resize(c, n);
  for (int ci = 0; ci < c; ++ci) {
    const T* plane = features.channel(ci);
    for (int ni = 0; ni < n; ++ni) {
      T acc = 0;
      const T* src = plane + ni * hw;
      for (std::size_t i = 0; i < hw; ++i) acc += src[i];
      cache.pooled(ci, ni) = acc / static_cast<T>(hw);
    }
  }
  Eigen::Map<const MatrixRM<T>> ws(p.squeeze_weight.data(), p.reduced, c);
  Eigen::Map<const MatrixRM<T>> we(p.excite_weight.data(), c, p.reduced);
  cache.hidden_pre.noalias() = ws * cache.pooled;
  cache.hidden_pre.colwise() += ConstVecMap<T>(p.squeeze_bias.data(), p.reduced);
  MatrixRM<T> z = we * cache.hidden_pre.cwiseMax(T(0));
  z.colwise() += ConstVecMap<T>(p.excite_bias.data(), c);
  cache.scale = z.unaryExpr([](T v) { return T(1) / (T(1) + std::exp(-v)); });
}

template <typename T>
void channel_attention_backward(const Tensor<T>& features, const AttentionParams<T>& p,
                                const AttentionCache<T>& cache, const MatrixRM<T>& dscale,
                                Tensor<T>& dfeatures, const AttentionGrads<T>& grads) {
  const int c = features.channels;
  const int n = features.batch;
  const std::size_t hw = features.spatial();
  Eigen::Map<const MatrixRM<T>> ws(p.squeeze_weight.data(), p.reduced, c);
  Eigen::Map<const MatrixRM<T>> we(p.excite_weight.data(), c, p.reduced);

  const MatrixRM<T> dz =
      dscale.cwiseProduct(cache.scale.cwiseProduct((T(1) - cache.scale.array()).matrix()));
  const MatrixRM<T> hidden = cache.hidden_pre.cwiseMax(T(0));
  Eigen::Map<MatrixRM<T>>(grads.excite_weight.data(), c, p.reduced).noalias() +=
      dz * hidden.transpose();
  add_row_sums(dz, grads.excite_bias.data());

  MatrixRM<T> dhidden = we.transpose() * dz;
  dhidden = dhidden.cwiseProduct(
      cache.hidden_pre.unaryExpr([](T v) { return v > T(0) ? T(1) : T(0); }));
  Eigen::Map<MatrixRM<T>>(grads.squeeze_weight.data(), p.reduced, c).noalias() +=
      dhidden * cache.pooled.transpose();
  add_row_sums(dhidden, grads.squeeze_bias.data());

  const MatrixRM<T> dpooled = ws.transpose() * dhidden;
  for (int ci = 0; ci < c; ++ci) {
    T* plane = dfeatures.channel(ci);
    for (int ni = 0; ni < n; ++ni) {
      const T g = dpooled(ci, ni) / static_cast<T>(hw);
      T* dst = plane + ni * hw;
      for (std::size_t i = 0; i < hw; ++i) dst[i] += g;
    }
  }
}

#define SRMIX_INSTANTIATE_LAYERS(T)                                                             \
  template Tensor<T> images_to_tensor<T>(std::span<const ImageBuffer>);                        \
  template ImageBuffer tensor_to_image<T>(const Tensor<T>&, int);                              \
  template void conv2d_forward<T>(const Tensor<T>&, std::span<const T>, std::span<const T>,    \
                                  const ConvShape&, Tensor<T>&);                               \
  template void conv2d_backward<T>(const Tensor<T>&, std::span<const T>, const ConvShape&,     \
                                   const Tensor<T>&, Tensor<T>*, std::span<T>, std::span<T>);  \
  template void fuse_forward<T>(const std::vector<const Tensor<T>*>&, std::span<const T>,      \
                                std::span<const T>, int, Tensor<T>&);                          \
  template void fuse_backward<T>(const std::vector<const Tensor<T>*>&, std::span<const T>, int, \
                                 const Tensor<T>&, const std::vector<Tensor<T>*>&,             \
                                 std::span<T>, std::span<T>);                                  \
  template Tensor<T> pixel_shuffle<T>(const Tensor<T>&, int);                                  \
  template Tensor<T> pixel_unshuffle<T>(const Tensor<T>&, int);                                \
  template void channel_attention_forward<T>(const Tensor<T>&, const AttentionParams<T>&,      \
                                             AttentionCache<T>&);                              \
  template void channel_attention_backward<T>(const Tensor<T>&, const AttentionParams<T>&,     \
                                              const AttentionCache<T>&, const MatrixRM<T>&,    \
                                              Tensor<T>&, const AttentionGrads<T>&);

SRMIX_INSTANTIATE_LAYERS(float)
SRMIX_INSTANTIATE_LAYERS(double)

}  // namespace srmix
