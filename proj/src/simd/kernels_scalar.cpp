#include <algorithm>
#include <cmath>

#include "roomest/geometry.hpp"
#include "roomest/simd/kernels.hpp"

namespace roomest::simd {
namespace {

void accumulate_windowed_sinc_scalar(float* out, std::size_t n, double center, float amplitude,
                                     double half_width) {
  const auto lo = static_cast<std::ptrdiff_t>(std::max(0.0, std::floor(center - half_width)));
  const auto hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n) - 1,
                                           static_cast<std::ptrdiff_t>(std::ceil(center + half_width)));
  for (std::ptrdiff_t i = lo; i <= hi; ++i) {
    const double t = static_cast<double>(i) - center;
    if (std::abs(t) >= half_width) continue;
    const double sinc = std::abs(t) < 1e-9 ? 1.0 : std::sin(kPi * t) / (kPi * t);
    const double window = 0.5 * (1.0 + std::cos(kPi * t / half_width));
    out[i] += static_cast<float>(amplitude * sinc * window);
  }
}

void abs_envelope_scalar(const float* in, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::fabs(in[i]);
}

float max_value_scalar(const float* in, std::size_t n) {
  if (n == 0) return 0.0f;
  float m = in[0];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, in[i]);
  return m;
}

std::size_t local_maxima_scalar(const float* env, std::size_t n, float threshold,
                                std::uint32_t* idx_out) {
  std::size_t count = 0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (env[i] > env[i - 1] && env[i] >= env[i + 1] && env[i] >= threshold) {
      idx_out[count++] = static_cast<std::uint32_t>(i);
    }
  }
  return count;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{
      Backend::kScalar,         "scalar",          &accumulate_windowed_sinc_scalar,
      &abs_envelope_scalar,     &max_value_scalar, &local_maxima_scalar,
  };
  return table;
}

}  // namespace roomest::simd
