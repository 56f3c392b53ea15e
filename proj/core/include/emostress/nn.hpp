#pragma once

// Layer kernels with hand-written backward passes. Everything is templated on
// the scalar so the same code trains in float and gradient-checks in double.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "emostress/error.hpp"
#include "emostress/rng.hpp"
#include "emostress/tensor.hpp"

namespace emostress::nn {

enum class Padding { Same, Valid };

inline constexpr std::size_t kKernel = 3;

template <class T>
struct ConvGrads {
  Tensor<T> input;
  Tensor<T> kernels;
  Tensor<T> bias;
};

inline void check_conv_shapes(const Shape& in, const Shape& k, std::size_t bias_len) {
  if (in.size() != 3 || k.size() != 4 || k[1] != in[0] || k[2] != kKernel || k[3] != kKernel || bias_len != k[0]) {
    throw Error(Errc::ShapeMismatch, "conv2d input " + shape_to_string(in) + " kernels " + shape_to_string(k));
  }
}

inline Shape conv_output_shape(const Shape& in, std::size_t out_channels, Padding pad) {
  if (pad == Padding::Same) return {out_channels, in[1], in[2]};
  if (in[1] < kKernel || in[2] < kKernel) throw Error(Errc::InputTooSmall, "valid conv needs at least 3x3 input");
  return {out_channels, in[1] - 2, in[2] - 2};
}

// out[o,y,x] = b[o] + sum_{c,dy,dx} in[c, y+dy-p, x+dx-p] * k[o,c,dy,dx]  (cross-correlation, stride 1)
template <class T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias, Padding pad) {
  check_conv_shapes(input.shape, kernels.shape, bias.size());
  const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t cout = kernels.dim(0);
  Tensor<T> out(conv_output_shape(input.shape, cout, pad));
  const std::size_t ho = out.dim(1), wo = out.dim(2);
  const std::ptrdiff_t p = pad == Padding::Same ? 1 : 0;

  for (std::size_t o = 0; o < cout; ++o) {
    T* plane = out.data.data() + o * ho * wo;
    std::fill(plane, plane + ho * wo, bias[o]);
    for (std::size_t c = 0; c < cin; ++c) {
      const T* src = input.data.data() + c * h * w;
      const T* k = kernels.data.data() + (o * cin + c) * kKernel * kKernel;
      for (std::size_t dy = 0; dy < kKernel; ++dy) {
        const std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(dy) - p;
        const std::size_t y0 = oy < 0 ? static_cast<std::size_t>(-oy) : 0;
        const std::size_t y1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(ho), static_cast<std::ptrdiff_t>(h) - oy);
        for (std::size_t dx = 0; dx < kKernel; ++dx) {
          const T weight = k[dy * kKernel + dx];
          const std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(dx) - p;
          const std::size_t x0 = ox < 0 ? static_cast<std::size_t>(-ox) : 0;
          const std::size_t x1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(wo), static_cast<std::ptrdiff_t>(w) - ox);
          for (std::size_t y = y0; y < y1; ++y) {
            T* dst = plane + y * wo;
            const T* row = src + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(y) + oy) * w;
            for (std::size_t x = x0; x < x1; ++x) dst[x] += weight * row[static_cast<std::ptrdiff_t>(x) + ox];
          }
        }
      }
    }
  }
  return out;
}

// Accumulates into grad_kernels / grad_bias; grad_input (if non-null) is overwritten.
template <class T>
void conv2d_backward_accumulate(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& grad_out,
                                Padding pad, Tensor<T>* grad_input, Tensor<T>& grad_kernels, Tensor<T>& grad_bias) {
  check_conv_shapes(input.shape, kernels.shape, grad_bias.size());
  const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t cout = kernels.dim(0);
  if (grad_out.shape != conv_output_shape(input.shape, cout, pad) || grad_kernels.shape != kernels.shape) {
    throw Error(Errc::ShapeMismatch, "conv2d backward gradient shape " + shape_to_string(grad_out.shape));
  }
  const std::size_t ho = grad_out.dim(1), wo = grad_out.dim(2);
  const std::ptrdiff_t p = pad == Padding::Same ? 1 : 0;
  if (grad_input) {
    grad_input->shape = input.shape;
    grad_input->data.assign(input.size(), T{});
  }

  for (std::size_t o = 0; o < cout; ++o) {
    const T* g = grad_out.data.data() + o * ho * wo;
    T bsum{};
    for (std::size_t i = 0; i < ho * wo; ++i) bsum += g[i];
    grad_bias[o] += bsum;
    for (std::size_t c = 0; c < cin; ++c) {
      const T* src = input.data.data() + c * h * w;
      const T* k = kernels.data.data() + (o * cin + c) * kKernel * kKernel;
      T* gk = grad_kernels.data.data() + (o * cin + c) * kKernel * kKernel;
      T* gin = grad_input ? grad_input->data.data() + c * h * w : nullptr;
      for (std::size_t dy = 0; dy < kKernel; ++dy) {
        const std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(dy) - p;
        const std::size_t y0 = oy < 0 ? static_cast<std::size_t>(-oy) : 0;
        const std::size_t y1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(ho), static_cast<std::ptrdiff_t>(h) - oy);
        for (std::size_t dx = 0; dx < kKernel; ++dx) {
          const T weight = k[dy * kKernel + dx];
          const std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(dx) - p;
          const std::size_t x0 = ox < 0 ? static_cast<std::size_t>(-ox) : 0;
          const std::size_t x1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(wo), static_cast<std::ptrdiff_t>(w) - ox);
          T acc{};
          for (std::size_t y = y0; y < y1; ++y) {
            const T* grow = g + y * wo;
            const std::size_t iy = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(y) + oy);
            const T* row = src + iy * w;
            for (std::size_t x = x0; x < x1; ++x) acc += grow[x] * row[static_cast<std::ptrdiff_t>(x) + ox];
            if (gin) {
              T* grow_in = gin + iy * w;
              for (std::size_t x = x0; x < x1; ++x) grow_in[static_cast<std::ptrdiff_t>(x) + ox] += weight * grow[x];
            }
          }
          gk[dy * kKernel + dx] += acc;
        }
      }
    }
  }
}

template <class T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& grad_out, Padding pad) {
  ConvGrads<T> g{Tensor<T>{}, Tensor<T>(kernels.shape), Tensor<T>(Shape{kernels.dim(0)})};
  conv2d_backward_accumulate(input, kernels, grad_out, pad, &g.input, g.kernels, g.bias);
  return g;
}

template <class T>
struct PoolResult {
  Tensor<T> output;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
};

// Non-overlapping 2x2 max pool; trailing odd row/column dropped; ties go to
// the first element in row-major scan order.
template <class T>
PoolResult<T> maxpool2x2_forward(const Tensor<T>& input) {
  if (input.rank() != 3) throw Error(Errc::ShapeMismatch, "maxpool expects CxHxW, got " + shape_to_string(input.shape));
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h < 2 || w < 2) throw Error(Errc::InputTooSmall, "maxpool needs H, W >= 2, got " + shape_to_string(input.shape));
  const std::size_t ho = h / 2, wo = w / 2;
  PoolResult<T> r{Tensor<T>(Shape{c, ho, wo}), std::vector<std::uint32_t>(c * ho * wo)};
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < ho; ++y) {
      for (std::size_t x = 0; x < wo; ++x) {
        std::size_t best = (ch * h + 2 * y) * w + 2 * x;
        const std::size_t candidates[3] = {best + 1, best + w, best + w + 1};
        for (std::size_t idx : candidates)
          if (input[idx] > input[best]) best = idx;
        const std::size_t o = (ch * ho + y) * wo + x;
        r.output[o] = input[best];
        r.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

template <class T>
Tensor<T> maxpool2x2_backward(const Tensor<T>& grad_out, std::span<const std::uint32_t> argmax, const Shape& input_shape) {
  if (grad_out.size() != argmax.size()) throw Error(Errc::ShapeMismatch, "maxpool backward size mismatch");
  Tensor<T> g(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += grad_out[i];
  return g;
}

template <class T>
Tensor<T> relu_forward(Tensor<T> x) {
  for (auto& v : x.data) v = v > T{} ? v : T{};
  return x;
}

// Passes gradient where the forward input was strictly positive.
template <class T>
Tensor<T> relu_backward(const Tensor<T>& input, Tensor<T> grad_out) {
  if (input.size() != grad_out.size()) throw Error(Errc::ShapeMismatch, "relu backward size mismatch");
  for (std::size_t i = 0; i < input.size(); ++i)
    if (!(input[i] > T{})) grad_out[i] = T{};
  return grad_out;
}

template <class T>
struct DenseGrads {
  std::vector<T> input;
  Tensor<T> weights;
  std::vector<T> bias;
};

// y = W x + b with W stored m x n row-major.
template <class T>
std::vector<T> dense_forward(std::span<const T> x, const Tensor<T>& weights, std::span<const T> bias) {
  if (weights.rank() != 2 || weights.dim(1) != x.size() || weights.dim(0) != bias.size()) {
    throw Error(Errc::ShapeMismatch, "dense W " + shape_to_string(weights.shape) + " x " + std::to_string(x.size()));
  }
  const std::size_t m = weights.dim(0), n = weights.dim(1);
  std::vector<T> y(m);
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = weights.data.data() + i * n;
    T acc{};
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * x[j];
    y[i] = acc + bias[i];
  }
  return y;
}

template <class T>
void dense_backward_accumulate(std::span<const T> x, const Tensor<T>& weights, std::span<const T> grad_out,
                               std::vector<T>* grad_input, Tensor<T>& grad_weights, std::span<T> grad_bias) {
  const std::size_t m = weights.dim(0), n = weights.dim(1);
  if (grad_out.size() != m || x.size() != n || grad_weights.shape != weights.shape || grad_bias.size() != m) {
    throw Error(Errc::ShapeMismatch, "dense backward shapes");
  }
  if (grad_input) grad_input->assign(n, T{});
  for (std::size_t i = 0; i < m; ++i) {
    const T g = grad_out[i];
    grad_bias[i] += g;
    T* gw = grad_weights.data.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) gw[j] += g * x[j];
    if (grad_input) {
      const T* row = weights.data.data() + i * n;
      T* gi = grad_input->data();
      for (std::size_t j = 0; j < n; ++j) gi[j] += row[j] * g;
    }
  }
}

template <class T>
DenseGrads<T> dense_backward(std::span<const T> x, const Tensor<T>& weights, std::span<const T> grad_out) {
  DenseGrads<T> g{{}, Tensor<T>(weights.shape), std::vector<T>(weights.dim(0))};
  dense_backward_accumulate<T>(x, weights, grad_out, &g.input, g.weights, g.bias);
  return g;
}

template <class T>
std::vector<T> softmax(std::span<const T> logits) {
  std::vector<T> p(logits.size());
  if (logits.empty()) return p;
  const T shift = *std::max_element(logits.begin(), logits.end());
  T sum{};
  for (std::size_t i = 0; i < logits.size(); ++i) sum += p[i] = std::exp(logits[i] - shift);
  for (auto& v : p) v /= sum;
  return p;
}

template <class T>
struct LossGrad {
  T loss;
  std::vector<T> grad;
};

// loss = logsumexp(z) - z[label]; grad = softmax(z) - onehot(label).
template <class T>
LossGrad<T> softmax_cross_entropy(std::span<const T> logits, std::size_t label) {
  if (label >= logits.size()) {
    throw Error(Errc::LabelOutOfRange, "label " + std::to_string(label) + " with " + std::to_string(logits.size()) + " classes");
  }
  const T shift = *std::max_element(logits.begin(), logits.end());
  LossGrad<T> r{T{}, std::vector<T>(logits.size())};
  T others{};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    r.grad[i] = std::exp(logits[i] - shift);
    if (i != label) others += r.grad[i];
  }
  const T own = r.grad[label];
  const T sum = own + others;
  // When the label holds the maximum, loss = log1p(others / own) keeps full
  // relative precision as the loss approaches zero.
  r.loss = logits[label] == shift ? std::log1p(others / own) : std::log(sum) + shift - logits[label];
  for (auto& g : r.grad) g /= sum;
  r.grad[label] = -others / sum;
  return r;
}

template <class T>
struct AdamState {
  Tensor<T> m;
  Tensor<T> v;
  std::uint64_t t = 0;

  AdamState() = default;
  explicit AdamState(const Shape& shape) : m(shape), v(shape) {}
};

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
void adam_step(Tensor<T>& param, const Tensor<T>& grad, AdamState<T>& state, const AdamParams& hp) {
  if (grad.shape != param.shape || state.m.shape != param.shape || state.v.shape != param.shape) {
    throw Error(Errc::ShapeMismatch, "adam shapes: param " + shape_to_string(param.shape) + " grad " +
                                         shape_to_string(grad.shape));
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.t));
  const T b1 = static_cast<T>(hp.beta1), b2 = static_cast<T>(hp.beta2);
  const T lr = static_cast<T>(hp.lr), eps = static_cast<T>(hp.eps);
  const T inv_bc1 = static_cast<T>(1.0 / bc1), inv_bc2 = static_cast<T>(1.0 / bc2);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const T g = grad[i];
    state.m[i] = b1 * state.m[i] + (T{1} - b1) * g;
    state.v[i] = b2 * state.v[i] + (T{1} - b2) * g * g;
    const T mhat = state.m[i] * inv_bc1;
    const T vhat = state.v[i] * inv_bc2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

// Fan-in: C_in*kh*kw for rank-4 kernels, n for an m x n dense matrix.
inline std::size_t fan_in(const Shape& shape) {
  if (shape.size() == 4) return shape[1] * shape[2] * shape[3];
  if (shape.size() == 2) return shape[1];
  throw Error(Errc::ShapeMismatch, "cannot derive fan-in from " + shape_to_string(shape));
}

// i.i.d. N(0, 2/fan_in), drawn in row-major order with Rng::normal.
template <class T>
Tensor<T> he_init(const Shape& shape, Rng& rng) {
  Tensor<T> t(shape);
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in(shape)));
  for (auto& v : t.data) v = static_cast<T>(rng.normal() * stddev);
  return t;
}

// Central-difference check: max over coordinates of |a - n| / max(|a|, |n|, 1e-8).
double grad_check(const std::function<double(std::span<const double>)>& f, std::span<const double> point,
                  std::span<const double> analytic, double h = 1e-5);

}  // namespace emostress::nn
