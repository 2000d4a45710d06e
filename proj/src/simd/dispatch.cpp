#include <cstdlib>
#include <string_view>

#include "kernels_internal.hpp"

namespace roomest::simd {

bool cpu_supports_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported;
#else
  return false;
#endif
}

const KernelTable* kernels_for(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      return &scalar_kernels();
    case Backend::kAvx2:
#if defined(ROOMEST_HAVE_AVX2)
      if (cpu_supports_avx2()) return &detail::avx2_kernels();
#endif
      return nullptr;
  }
  return nullptr;
}

const KernelTable& active_kernels() {
  static const KernelTable& table = []() -> const KernelTable& {
    const char* env = std::getenv("ROOMEST_SIMD");
    if (env != nullptr && std::string_view(env) == "scalar") return scalar_kernels();
    if (const KernelTable* t = kernels_for(Backend::kAvx2)) return *t;
    return scalar_kernels();
  }();
  return table;
}

void accumulate_windowed_sinc(std::span<float> out, double center, float amplitude,
                              double half_width) {
  active_kernels().accumulate_windowed_sinc(out.data(), out.size(), center, amplitude, half_width);
}

std::vector<float> abs_envelope(std::span<const float> in) {
  std::vector<float> out(in.size());
  active_kernels().abs_envelope(in.data(), out.data(), in.size());
  return out;
}

float max_value(std::span<const float> in) { return active_kernels().max_value(in.data(), in.size()); }

std::vector<std::uint32_t> local_maxima(std::span<const float> env, float threshold) {
  std::vector<std::uint32_t> idx(env.size());
  const std::size_t n = active_kernels().local_maxima(env.data(), env.size(), threshold, idx.data());
  idx.resize(n);
  return idx;
}

}  // namespace roomest::simd
