// AVX2/FMA variants. This translation unit is compiled with -mavx2 -mfma and
// only reached after a CPUID check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "kernels_internal.hpp"
#include "roomest/geometry.hpp"

namespace roomest::simd::detail {
namespace {

// cos(x) for |x| <= pi/2, even Taylor polynomial through x^12 (abs error < 1e-8).
inline __m256 cos_half_range(__m256 x) {
  const __m256 x2 = _mm256_mul_ps(x, x);
  __m256 r = _mm256_set1_ps(1.0f / 479001600.0f);
  r = _mm256_fmadd_ps(r, x2, _mm256_set1_ps(-1.0f / 3628800.0f));
  r = _mm256_fmadd_ps(r, x2, _mm256_set1_ps(1.0f / 40320.0f));
  r = _mm256_fmadd_ps(r, x2, _mm256_set1_ps(-1.0f / 720.0f));
  r = _mm256_fmadd_ps(r, x2, _mm256_set1_ps(1.0f / 24.0f));
  r = _mm256_fmadd_ps(r, x2, _mm256_set1_ps(-0.5f));
  r = _mm256_fmadd_ps(r, x2, _mm256_set1_ps(1.0f));
  return r;
}

inline float cos_half_range(float x) {
  const float x2 = x * x;
  float r = 1.0f / 479001600.0f;
  r = std::fma(r, x2, -1.0f / 3628800.0f);
  r = std::fma(r, x2, 1.0f / 40320.0f);
  r = std::fma(r, x2, -1.0f / 720.0f);
  r = std::fma(r, x2, 1.0f / 24.0f);
  r = std::fma(r, x2, -0.5f);
  r = std::fma(r, x2, 1.0f);
  return r;
}

// Split the centre into the nearest integer ic and a fraction f in
// [-0.5, 0.5]. Then t = (k - ic) - f keeps its relative precision next to the
// pulse, and sin(pi t) = -(-1)^(k - ic) sin(pi f), so the sinc numerator is a
// single precomputed value with alternating sign. The Hann window
// 0.5 * (1 + cos(pi t / hw)) is cos^2(pi t / (2 hw)).
void accumulate_windowed_sinc_avx2(float* out, std::size_t n, double center, float amplitude,
                                   double half_width) {
  const auto lo = static_cast<std::ptrdiff_t>(std::max(0.0, std::floor(center - half_width)));
  const auto hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n) - 1,
                                           static_cast<std::ptrdiff_t>(std::ceil(center + half_width)));
  if (hi < lo) return;

  const double local_center = center - static_cast<double>(lo);
  const double ic = std::nearbyint(local_center);
  const double frac = local_center - ic;
  const auto s = static_cast<float>(std::sin(kPi * frac));
  const auto f = static_cast<float>(frac);
  const auto ic_f = static_cast<float>(ic);
  const bool ic_odd = static_cast<long long>(ic) % 2 != 0;
  const auto hw = static_cast<float>(half_width);
  const auto pi = static_cast<float>(kPi);
  const float theta_scale = pi / (2.0f * hw);

  const __m256 v_f = _mm256_set1_ps(f);
  const __m256 v_ic = _mm256_set1_ps(ic_f);
  const __m256 v_hw = _mm256_set1_ps(hw);
  const __m256 v_pi = _mm256_set1_ps(pi);
  const __m256 v_theta = _mm256_set1_ps(theta_scale);
  const __m256 v_amp = _mm256_set1_ps(amplitude);
  const __m256 v_one = _mm256_set1_ps(1.0f);
  const __m256 v_eps = _mm256_set1_ps(1e-6f);
  const __m256 v_abs = _mm256_castsi256_ps(_mm256_set1_epi32(0x7fffffff));
  // Blocks start at even k; lane j has numerator -s when j - ic is even.
  const float e = ic_odd ? s : -s;
  const __m256 v_num = _mm256_setr_ps(e, -e, e, -e, e, -e, e, -e);
  const __m256 v_lane = _mm256_setr_ps(0, 1, 2, 3, 4, 5, 6, 7);

  const std::ptrdiff_t count = hi - lo + 1;
  float* base = out + lo;
  std::ptrdiff_t k = 0;
  for (; k + 8 <= count; k += 8) {
    const __m256 kk = _mm256_add_ps(_mm256_set1_ps(static_cast<float>(k)), v_lane);
    const __m256 t = _mm256_sub_ps(_mm256_sub_ps(kk, v_ic), v_f);
    const __m256 abs_t = _mm256_and_ps(t, v_abs);
    __m256 sinc = _mm256_div_ps(v_num, _mm256_mul_ps(v_pi, t));
    sinc = _mm256_blendv_ps(sinc, v_one, _mm256_cmp_ps(abs_t, v_eps, _CMP_LT_OQ));
    const __m256 c = cos_half_range(_mm256_mul_ps(t, v_theta));
    __m256 w = _mm256_mul_ps(c, c);
    w = _mm256_and_ps(w, _mm256_cmp_ps(abs_t, v_hw, _CMP_LT_OQ));
    const __m256 acc = _mm256_loadu_ps(base + k);
    _mm256_storeu_ps(base + k, _mm256_fmadd_ps(_mm256_mul_ps(v_amp, sinc), w, acc));
  }
  for (; k < count; ++k) {
    const float t = (static_cast<float>(k) - ic_f) - f;
    if (std::fabs(t) >= hw) continue;
    const bool even = ((k % 2 != 0) == ic_odd);
    const float num = even ? -s : s;
    const float sinc = std::fabs(t) < 1e-6f ? 1.0f : num / (pi * t);
    const float c = cos_half_range(t * theta_scale);
    base[k] += amplitude * sinc * (c * c);
  }
}

void abs_envelope_avx2(const float* in, float* out, std::size_t n) {
  const __m256 v_abs = _mm256_castsi256_ps(_mm256_set1_epi32(0x7fffffff));
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_and_ps(_mm256_loadu_ps(in + i), v_abs));
  }
  for (; i < n; ++i) out[i] = std::fabs(in[i]);
}

float max_value_avx2(const float* in, std::size_t n) {
  if (n == 0) return 0.0f;
  std::size_t i = 0;
  float m = in[0];
  if (n >= 8) {
    __m256 acc = _mm256_loadu_ps(in);
    for (i = 8; i + 8 <= n; i += 8) acc = _mm256_max_ps(acc, _mm256_loadu_ps(in + i));
    __m128 lo = _mm256_castps256_ps128(acc);
    __m128 hi = _mm256_extractf128_ps(acc, 1);
    lo = _mm_max_ps(lo, hi);
    lo = _mm_max_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_max_ss(lo, _mm_shuffle_ps(lo, lo, 1));
    m = _mm_cvtss_f32(lo);
  }
  for (; i < n; ++i) m = std::max(m, in[i]);
  return m;
}

std::size_t local_maxima_avx2(const float* env, std::size_t n, float threshold,
                              std::uint32_t* idx_out) {
  std::size_t count = 0;
  if (n < 3) return 0;
  const __m256 v_thr = _mm256_set1_ps(threshold);
  std::size_t i = 1;
  for (; i + 9 <= n; i += 8) {
    const __m256 prev = _mm256_loadu_ps(env + i - 1);
    const __m256 cur = _mm256_loadu_ps(env + i);
    const __m256 next = _mm256_loadu_ps(env + i + 1);
    __m256 m = _mm256_cmp_ps(cur, prev, _CMP_GT_OQ);
    m = _mm256_and_ps(m, _mm256_cmp_ps(cur, next, _CMP_GE_OQ));
    m = _mm256_and_ps(m, _mm256_cmp_ps(cur, v_thr, _CMP_GE_OQ));
    auto bits = static_cast<unsigned>(_mm256_movemask_ps(m));
    while (bits != 0) {
      const int lane = __builtin_ctz(bits);
      idx_out[count++] = static_cast<std::uint32_t>(i + static_cast<std::size_t>(lane));
      bits &= bits - 1;
    }
  }
  for (; i + 1 < n; ++i) {
    if (env[i] > env[i - 1] && env[i] >= env[i + 1] && env[i] >= threshold) {
      idx_out[count++] = static_cast<std::uint32_t>(i);
    }
  }
  return count;
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable table{
      Backend::kAvx2,        "avx2",          &accumulate_windowed_sinc_avx2,
      &abs_envelope_avx2,    &max_value_avx2, &local_maxima_avx2,
  };
  return table;
}

}  // namespace roomest::simd::detail
