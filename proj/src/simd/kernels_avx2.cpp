// Compiled with -mavx2 -mfma. Only reached after the dispatcher has checked
// the CPU, so nothing here may be inlined into other translation units:
// keep this file free of standard-library templates.

#include <immintrin.h>

#include "boxcorner/simd/kernels.hpp"

namespace boxc::simd {
namespace {

template <class T>
struct Reg;

template <>
struct Reg<float> {
  using type = __m256;
  static constexpr std::size_t width = 8;
  static type zero() { return _mm256_setzero_ps(); }
  static type set1(float v) { return _mm256_set1_ps(v); }
  static type load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, type v) { _mm256_storeu_ps(p, v); }
  static type fmadd(type a, type b, type c) { return _mm256_fmadd_ps(a, b, c); }
  static type add(type a, type b) { return _mm256_add_ps(a, b); }
  static float hsum(type v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 sh = _mm_movehdup_ps(lo);
    __m128 s = _mm_add_ps(lo, sh);
    sh = _mm_movehl_ps(sh, s);
    s = _mm_add_ss(s, sh);
    return _mm_cvtss_f32(s);
  }
};

template <>
struct Reg<double> {
  using type = __m256d;
  static constexpr std::size_t width = 4;
  static type zero() { return _mm256_setzero_pd(); }
  static type set1(double v) { return _mm256_set1_pd(v); }
  static type load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, type v) { _mm256_storeu_pd(p, v); }
  static type fmadd(type a, type b, type c) { return _mm256_fmadd_pd(a, b, c); }
  static type add(type a, type b) { return _mm256_add_pd(a, b); }
  static double hsum(type v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d h = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, h));
  }
};

template <class T>
T dot_avx2(const T* a, const T* b, std::size_t n) {
  using R = Reg<T>;
  constexpr std::size_t w = R::width;
  auto s0 = R::zero(), s1 = R::zero();
  std::size_t i = 0;
  for (; i + 2 * w <= n; i += 2 * w) {
    s0 = R::fmadd(R::load(a + i), R::load(b + i), s0);
    s1 = R::fmadd(R::load(a + i + w), R::load(b + i + w), s1);
  }
  for (; i + w <= n; i += w) s0 = R::fmadd(R::load(a + i), R::load(b + i), s0);
  T s = R::hsum(R::add(s0, s1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

template <class T>
void axpy_avx2(std::size_t n, T alpha, const T* x, T* y) {
  using R = Reg<T>;
  constexpr std::size_t w = R::width;
  const auto av = R::set1(alpha);
  std::size_t i = 0;
  for (; i + w <= n; i += w) R::store(y + i, R::fmadd(av, R::load(x + i), R::load(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
void zero_fill(T* c, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) c[i] = T(0);
}

// C(m x n) += A * B(k x n) where A(i, p) = a[i * rs + p * cs]. Register block
// of 4 rows by 2 vectors.
template <class T>
void gemm_rank_update(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t rs,
                      std::size_t cs, const T* b, T* c) {
  using R = Reg<T>;
  constexpr std::size_t w = R::width;
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    std::size_t j = 0;
    for (; j + 2 * w <= n; j += 2 * w) {
      auto c00 = R::load(c + (i + 0) * n + j), c01 = R::load(c + (i + 0) * n + j + w);
      auto c10 = R::load(c + (i + 1) * n + j), c11 = R::load(c + (i + 1) * n + j + w);
      auto c20 = R::load(c + (i + 2) * n + j), c21 = R::load(c + (i + 2) * n + j + w);
      auto c30 = R::load(c + (i + 3) * n + j), c31 = R::load(c + (i + 3) * n + j + w);
      for (std::size_t p = 0; p < k; ++p) {
        const auto b0 = R::load(b + p * n + j);
        const auto b1 = R::load(b + p * n + j + w);
        const T* ap = a + p * cs + i * rs;
        auto a0 = R::set1(ap[0]);
        c00 = R::fmadd(a0, b0, c00);
        c01 = R::fmadd(a0, b1, c01);
        auto a1 = R::set1(ap[rs]);
        c10 = R::fmadd(a1, b0, c10);
        c11 = R::fmadd(a1, b1, c11);
        auto a2 = R::set1(ap[2 * rs]);
        c20 = R::fmadd(a2, b0, c20);
        c21 = R::fmadd(a2, b1, c21);
        auto a3 = R::set1(ap[3 * rs]);
        c30 = R::fmadd(a3, b0, c30);
        c31 = R::fmadd(a3, b1, c31);
      }
      R::store(c + (i + 0) * n + j, c00);
      R::store(c + (i + 0) * n + j + w, c01);
      R::store(c + (i + 1) * n + j, c10);
      R::store(c + (i + 1) * n + j + w, c11);
      R::store(c + (i + 2) * n + j, c20);
      R::store(c + (i + 2) * n + j + w, c21);
      R::store(c + (i + 3) * n + j, c30);
      R::store(c + (i + 3) * n + j + w, c31);
    }
    for (; j + w <= n; j += w) {
      auto c0 = R::load(c + (i + 0) * n + j);
      auto c1 = R::load(c + (i + 1) * n + j);
      auto c2 = R::load(c + (i + 2) * n + j);
      auto c3 = R::load(c + (i + 3) * n + j);
      for (std::size_t p = 0; p < k; ++p) {
        const auto bv = R::load(b + p * n + j);
        const T* ap = a + p * cs + i * rs;
        c0 = R::fmadd(R::set1(ap[0]), bv, c0);
        c1 = R::fmadd(R::set1(ap[rs]), bv, c1);
        c2 = R::fmadd(R::set1(ap[2 * rs]), bv, c2);
        c3 = R::fmadd(R::set1(ap[3 * rs]), bv, c3);
      }
      R::store(c + (i + 0) * n + j, c0);
      R::store(c + (i + 1) * n + j, c1);
      R::store(c + (i + 2) * n + j, c2);
      R::store(c + (i + 3) * n + j, c3);
    }
    for (; j < n; ++j) {
      for (std::size_t r = 0; r < 4; ++r) {
        T s = c[(i + r) * n + j];
        for (std::size_t p = 0; p < k; ++p) s += a[(i + r) * rs + p * cs] * b[p * n + j];
        c[(i + r) * n + j] = s;
      }
    }
  }
  for (; i < m; ++i) {
    T* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) axpy_avx2(n, a[i * rs + p * cs], b + p * n, ci);
  }
}

template <class T>
void gemm_nn_avx2(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
                  bool accumulate) {
  if (!accumulate) zero_fill(c, m * n);
  gemm_rank_update(m, n, k, a, k, 1, b, c);
}

template <class T>
void gemm_tn_avx2(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
                  bool accumulate) {
  if (!accumulate) zero_fill(c, m * n);
  gemm_rank_update(m, n, k, a, 1, m, b, c);
}

template <class T>
void gemm_nt_avx2(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
                  bool accumulate) {
  using R = Reg<T>;
  constexpr std::size_t w = R::width;
  for (std::size_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const T* b0 = b + (j + 0) * k;
      const T* b1 = b + (j + 1) * k;
      const T* b2 = b + (j + 2) * k;
      const T* b3 = b + (j + 3) * k;
      auto s0 = R::zero(), s1 = R::zero(), s2 = R::zero(), s3 = R::zero();
      std::size_t p = 0;
      for (; p + w <= k; p += w) {
        const auto av = R::load(ai + p);
        s0 = R::fmadd(av, R::load(b0 + p), s0);
        s1 = R::fmadd(av, R::load(b1 + p), s1);
        s2 = R::fmadd(av, R::load(b2 + p), s2);
        s3 = R::fmadd(av, R::load(b3 + p), s3);
      }
      T r0 = R::hsum(s0), r1 = R::hsum(s1), r2 = R::hsum(s2), r3 = R::hsum(s3);
      for (; p < k; ++p) {
        r0 += ai[p] * b0[p];
        r1 += ai[p] * b1[p];
        r2 += ai[p] * b2[p];
        r3 += ai[p] * b3[p];
      }
      T* ci = c + i * n + j;
      if (accumulate) {
        ci[0] += r0;
        ci[1] += r1;
        ci[2] += r2;
        ci[3] += r3;
      } else {
        ci[0] = r0;
        ci[1] = r1;
        ci[2] = r2;
        ci[3] = r3;
      }
    }
    for (; j < n; ++j) {
      const T s = dot_avx2(ai, b + j * k, k);
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
  }
}

template <class T>
const Kernels<T> kTable{Isa::Avx2, &dot_avx2<T>, &axpy_avx2<T>, &gemm_nn_avx2<T>,
                        &gemm_nt_avx2<T>, &gemm_tn_avx2<T>};

}  // namespace

const Kernels<float>* avx2_table_float() { return &kTable<float>; }
const Kernels<double>* avx2_table_double() { return &kTable<double>; }

}  // namespace boxc::simd
