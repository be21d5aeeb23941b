#pragma once

// Dense kernels behind the network layers. Each kernel has a portable scalar
// reference and, when built with BOXCORNER_ENABLE_AVX2, an AVX2/FMA variant.
// The variant is chosen once at first use from the CPU feature bits; setting
// BOXCORNER_SIMD=scalar in the environment pins the reference path.
//
// All matrices are dense row-major with the leading dimension equal to the
// column count.

#include <cstddef>

namespace boxc::simd {

enum class Isa { Scalar, Avx2 };

const char* to_string(Isa isa) noexcept;

template <class T>
struct Kernels {
  Isa isa;
  T (*dot)(const T* a, const T* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(std::size_t n, T alpha, const T* x, T* y);
  // C(m x n) (+)= A(m x k) * B(k x n)
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
                  bool accumulate);
  // C(m x n) (+)= A(m x k) * B(n x k)^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
                  bool accumulate);
  // C(m x n) (+)= A(k x m)^T * B(k x n)
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
                  bool accumulate);
};

template <class T>
const Kernels<T>& scalar_kernels();

// nullptr when the variant was not compiled in or the CPU lacks AVX2/FMA.
template <class T>
const Kernels<T>* avx2_kernels();

template <class T>
const Kernels<T>& active_kernels();

Isa active_isa();

}  // namespace boxc::simd
