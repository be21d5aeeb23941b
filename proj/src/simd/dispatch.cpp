#include <cstdlib>
#include <cstring>

#include "boxcorner/simd/kernels.hpp"

namespace boxc::simd {

#if defined(BOXCORNER_HAVE_AVX2)
const Kernels<float>* avx2_table_float();
const Kernels<double>* avx2_table_double();
#endif

namespace {

bool cpu_supports_avx2() {
#if defined(BOXCORNER_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

bool scalar_forced() {
  const char* env = std::getenv("BOXCORNER_SIMD");
  return env != nullptr && std::strcmp(env, "scalar") == 0;
}

}  // namespace

const char* to_string(Isa isa) noexcept {
  return isa == Isa::Avx2 ? "avx2" : "scalar";
}

template <>
const Kernels<float>* avx2_kernels<float>() {
#if defined(BOXCORNER_HAVE_AVX2)
  static const bool ok = cpu_supports_avx2();
  return ok ? avx2_table_float() : nullptr;
#else
  return nullptr;
#endif
}

template <>
const Kernels<double>* avx2_kernels<double>() {
#if defined(BOXCORNER_HAVE_AVX2)
  static const bool ok = cpu_supports_avx2();
  return ok ? avx2_table_double() : nullptr;
#else
  return nullptr;
#endif
}

template <class T>
const Kernels<T>& active_kernels() {
  static const Kernels<T>& chosen = [] () -> const Kernels<T>& {
    if (!scalar_forced()) {
      if (const auto* k = avx2_kernels<T>()) return *k;
    }
    return scalar_kernels<T>();
  }();
  return chosen;
}

template const Kernels<float>& active_kernels<float>();
template const Kernels<double>& active_kernels<double>();

Isa active_isa() { return active_kernels<float>().isa; }

}  // namespace boxc::simd
