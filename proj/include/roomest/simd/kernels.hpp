#pragma once

// Data-parallel inner loops used by rendering and peak detection. Each kernel
// has a scalar reference implementation and, on x86-64, an AVX2/FMA variant.
// The variant is picked once at startup from CPUID; the ROOMEST_SIMD
// environment variable ("scalar" or "avx2") overrides the choice.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace roomest::simd {

enum class Backend { kScalar, kAvx2 };

struct KernelTable {
  Backend backend;
  std::string_view name;

  // out[i] += amplitude * sinc(i - center) * hann((i - center) / half_width)
  // for every i in [0, n) with |i - center| < half_width.
  void (*accumulate_windowed_sinc)(float* out, std::size_t n, double center, float amplitude,
                                   double half_width);

  // out[i] = |in[i]|
  void (*abs_envelope)(const float* in, float* out, std::size_t n);

  // max_i in[i]; 0 for n == 0.
  float (*max_value)(const float* in, std::size_t n);

  // Writes every i in [1, n-1) with env[i] > env[i-1], env[i] >= env[i+1] and
  // env[i] >= threshold into idx_out (ascending). Returns the count. idx_out
  // must have room for n entries.
  std::size_t (*local_maxima)(const float* env, std::size_t n, float threshold,
                              std::uint32_t* idx_out);
};

const KernelTable& scalar_kernels();

/// nullptr when the variant was not built or the CPU lacks support.
const KernelTable* kernels_for(Backend backend);

/// The table selected for this process.
const KernelTable& active_kernels();

bool cpu_supports_avx2();

// Span conveniences over the active table.
void accumulate_windowed_sinc(std::span<float> out, double center, float amplitude,
                              double half_width);
std::vector<float> abs_envelope(std::span<const float> in);
float max_value(std::span<const float> in);
std::vector<std::uint32_t> local_maxima(std::span<const float> env, float threshold);

}  // namespace roomest::simd
