#pragma once

// Row-major layer primitives with explicit backward passes. Buffers are flat
// std::vector<T>; `n` is the row (token) count.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "boxcorner/nn/model.hpp"
#include "boxcorner/simd/kernels.hpp"

namespace boxc::nn::layers {

template <class T>
const simd::Kernels<T>& kern() {
  return simd::active_kernels<T>();
}

// y(n x out) = x(n x in) W + b
template <class T>
void linear_forward(const T* x, std::size_t n, const LinearParams<T>& p, T* y) {
  const std::size_t in = p.weight.shape[0];
  const std::size_t out = p.weight.shape[1];
  kern<T>().gemm_nn(n, out, in, x, p.weight.ptr(), y, false);
  for (std::size_t i = 0; i < n; ++i) {
    T* yi = y + i * out;
    for (std::size_t j = 0; j < out; ++j) yi[j] += p.bias[j];
  }
}

// Accumulates dW, db; writes (or adds to) dx when dx != nullptr.
template <class T>
void linear_backward(const T* x, std::size_t n, const LinearParams<T>& p, const T* dy,
                     LinearParams<T>& g, T* dx, bool accumulate_dx = false) {
  const std::size_t in = p.weight.shape[0];
  const std::size_t out = p.weight.shape[1];
  kern<T>().gemm_tn(in, out, n, x, dy, g.weight.ptr(), true);
  for (std::size_t i = 0; i < n; ++i) {
    const T* dyi = dy + i * out;
    for (std::size_t j = 0; j < out; ++j) g.bias[j] += dyi[j];
  }
  if (dx) kern<T>().gemm_nt(n, in, out, dy, p.weight.ptr(), dx, accumulate_dx);
}

template <class T>
struct NormCache {
  std::vector<T> xhat;
  std::vector<T> rstd;
};

inline constexpr double kNormEps = 1e-5;

template <class T>
void norm_forward(const T* x, std::size_t n, std::size_t d, const NormParams<T>& p, T* y,
                  NormCache<T>& c) {
  c.xhat.resize(n * d);
  c.rstd.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T* xi = x + i * d;
    T mean = 0;
    for (std::size_t j = 0; j < d; ++j) mean += xi[j];
    mean /= static_cast<T>(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (xi[j] - mean) * (xi[j] - mean);
    var /= static_cast<T>(d);
    const T rstd = T(1) / std::sqrt(var + static_cast<T>(kNormEps));
    c.rstd[i] = rstd;
    T* hi = c.xhat.data() + i * d;
    T* yi = y + i * d;
    for (std::size_t j = 0; j < d; ++j) {
      hi[j] = (xi[j] - mean) * rstd;
      yi[j] = hi[j] * p.gain[j] + p.shift[j];
    }
  }
}

// dx += norm backward of dy.
template <class T>
void norm_backward(const T* dy, std::size_t n, std::size_t d, const NormParams<T>& p,
                   const NormCache<T>& c, NormParams<T>& g, T* dx) {
  std::vector<T> dh(d);
  for (std::size_t i = 0; i < n; ++i) {
    const T* dyi = dy + i * d;
    const T* hi = c.xhat.data() + i * d;
    T mean_dh = 0, mean_dhh = 0;
    for (std::size_t j = 0; j < d; ++j) {
      g.gain[j] += dyi[j] * hi[j];
      g.shift[j] += dyi[j];
      dh[j] = dyi[j] * p.gain[j];
      mean_dh += dh[j];
      mean_dhh += dh[j] * hi[j];
    }
    mean_dh /= static_cast<T>(d);
    mean_dhh /= static_cast<T>(d);
    T* dxi = dx + i * d;
    for (std::size_t j = 0; j < d; ++j) dxi[j] += c.rstd[i] * (dh[j] - mean_dh - hi[j] * mean_dhh);
  }
}

template <class T>
struct AttentionCache {
  std::vector<T> qkv;    // n x 3d
  std::vector<T> probs;  // heads x n x n
  std::vector<T> ctx;    // n x d
};

template <class T>
void gather_head(const T* qkv, std::size_t n, std::size_t d, std::size_t offset, std::size_t dh, T* out) {
  for (std::size_t i = 0; i < n; ++i) std::copy_n(qkv + i * 3 * d + offset, dh, out + i * dh);
}

template <class T>
void scatter_head(const T* in, std::size_t n, std::size_t stride, std::size_t offset, std::size_t dh, T* dst) {
  for (std::size_t i = 0; i < n; ++i) {
    T* row = dst + i * stride + offset;
    const T* src = in + i * dh;
    for (std::size_t j = 0; j < dh; ++j) row[j] += src[j];
  }
}

// Full (unmasked) multi-head self-attention on x (n x d); y = out projection.
template <class T>
void attention_forward(const T* x, std::size_t n, std::size_t d, std::size_t heads,
                       const AttentionParams<T>& p, T* y, AttentionCache<T>& c) {
  const std::size_t dh = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  c.qkv.resize(n * 3 * d);
  c.probs.resize(heads * n * n);
  c.ctx.assign(n * d, T(0));
  linear_forward(x, n, p.qkv, c.qkv.data());

  std::vector<T> q(n * dh), k(n * dh), v(n * dh), o(n * dh);
  for (std::size_t h = 0; h < heads; ++h) {
    gather_head(c.qkv.data(), n, d, h * dh, dh, q.data());
    gather_head(c.qkv.data(), n, d, d + h * dh, dh, k.data());
    gather_head(c.qkv.data(), n, d, 2 * d + h * dh, dh, v.data());
    T* pr = c.probs.data() + h * n * n;
    kern<T>().gemm_nt(n, n, dh, q.data(), k.data(), pr, false);
    for (std::size_t i = 0; i < n; ++i) {
      T* row = pr + i * n;
      T mx = row[0] * scale;
      for (std::size_t j = 0; j < n; ++j) {
        row[j] *= scale;
        mx = std::max(mx, row[j]);
      }
      T sum = 0;
      for (std::size_t j = 0; j < n; ++j) {
        row[j] = std::exp(row[j] - mx);
        sum += row[j];
      }
      const T inv = T(1) / sum;
      for (std::size_t j = 0; j < n; ++j) row[j] *= inv;
    }
    kern<T>().gemm_nn(n, dh, n, pr, v.data(), o.data(), false);
    scatter_head(o.data(), n, d, h * dh, dh, c.ctx.data());
  }
  linear_forward(c.ctx.data(), n, p.out, y);
}

// dx += attention backward of dy.
template <class T>
void attention_backward(const T* x, std::size_t n, std::size_t d, std::size_t heads,
                        const AttentionParams<T>& p, const AttentionCache<T>& c, const T* dy,
                        AttentionParams<T>& g, T* dx) {
  const std::size_t dh = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  std::vector<T> dctx(n * d);
  linear_backward(c.ctx.data(), n, p.out, dy, g.out, dctx.data());

  std::vector<T> dqkv(n * 3 * d, T(0));
  std::vector<T> q(n * dh), k(n * dh), v(n * dh), dout(n * dh), dq(n * dh), dk(n * dh), dv(n * dh);
  std::vector<T> dp(n * n);
  for (std::size_t h = 0; h < heads; ++h) {
    gather_head(c.qkv.data(), n, d, h * dh, dh, q.data());
    gather_head(c.qkv.data(), n, d, d + h * dh, dh, k.data());
    gather_head(c.qkv.data(), n, d, 2 * d + h * dh, dh, v.data());
    for (std::size_t i = 0; i < n; ++i) std::copy_n(dctx.data() + i * d + h * dh, dh, dout.data() + i * dh);
    const T* pr = c.probs.data() + h * n * n;

    kern<T>().gemm_nt(n, n, dh, dout.data(), v.data(), dp.data(), false);
    kern<T>().gemm_tn(n, dh, n, pr, dout.data(), dv.data(), false);
    for (std::size_t i = 0; i < n; ++i) {
      T* dpi = dp.data() + i * n;
      const T* pi = pr + i * n;
      const T dotv = kern<T>().dot(dpi, pi, n);
      for (std::size_t j = 0; j < n; ++j) dpi[j] = pi[j] * (dpi[j] - dotv) * scale;
    }
    kern<T>().gemm_nn(n, dh, n, dp.data(), k.data(), dq.data(), false);
    kern<T>().gemm_tn(n, dh, n, dp.data(), q.data(), dk.data(), false);
    scatter_head(dq.data(), n, 3 * d, h * dh, dh, dqkv.data());
    scatter_head(dk.data(), n, 3 * d, d + h * dh, dh, dqkv.data());
    scatter_head(dv.data(), n, 3 * d, 2 * d + h * dh, dh, dqkv.data());
  }
  linear_backward(x, n, p.qkv, dqkv.data(), g.qkv, dx, true);
}

// tanh-form GELU
template <class T>
T gelu(T x) {
  constexpr T c = static_cast<T>(0.7978845608028654);
  constexpr T a = static_cast<T>(0.044715);
  return T(0.5) * x * (T(1) + std::tanh(c * (x + a * x * x * x)));
}

template <class T>
T gelu_grad(T x) {
  constexpr T c = static_cast<T>(0.7978845608028654);
  constexpr T a = static_cast<T>(0.044715);
  const T th = std::tanh(c * (x + a * x * x * x));
  return T(0.5) * (T(1) + th) + T(0.5) * x * (T(1) - th * th) * c * (T(1) + T(3) * a * x * x);
}

}  // namespace boxc::nn::layers
