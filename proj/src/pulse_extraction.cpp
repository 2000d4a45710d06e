#include "roomest/pulse_extraction.hpp"

#include <algorithm>
#include <cmath>

#include "roomest/error.hpp"
#include "roomest/simd/kernels.hpp"

namespace roomest {

std::vector<PathEntry> merge_close_entries(std::vector<PathEntry> entries, double tol) {
  std::sort(entries.begin(), entries.end(),
            [](const PathEntry& a, const PathEntry& b) { return a.d < b.d; });
  std::vector<PathEntry> merged;
  merged.reserve(entries.size());
  for (const PathEntry& e : entries) {
    if (!merged.empty() && e.d - merged.back().d < tol) {
      if (e.a > merged.back().a) merged.back() = e;
      continue;
    }
    merged.push_back(e);
  }
  return merged;
}

PathLengthSet pulses_to_pathlengths(std::span<const Pulse> pulses, double c, double tol) {
  if (pulses.empty()) throw InvalidArgument("pulse list is empty");
  if (!(c > 0.0)) throw InvalidArgument("speed of sound must be positive");
  if (!(tol > 0.0)) throw InvalidArgument("tolerance must be positive");

  std::vector<PathEntry> entries;
  entries.reserve(pulses.size());
  for (const Pulse& p : pulses) {
    const double d = p.toa * c;
    if (d > 0.0) entries.push_back({d, p.amplitude});
  }
  if (entries.empty()) throw InvalidArgument("no pulse with positive path length");

  PathLengthSet set;
  set.c = c;
  set.tol = tol;
  set.entries = merge_close_entries(std::move(entries), tol);
  return set;
}

RefinedPeak parabolic_refine(std::span<const float> env, std::size_t i) {
  const double y0 = env[i];
  if (i == 0 || i + 1 >= env.size()) return {static_cast<double>(i), y0};
  const double ym = env[i - 1];
  const double yp = env[i + 1];
  const double denom = ym - 2.0 * y0 + yp;
  if (denom >= 0.0) return {static_cast<double>(i), y0};
  const double offset = std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5);
  return {static_cast<double>(i) + offset, y0 - 0.25 * (ym - yp) * offset};
}

PathLengthSet detect_peaks(const SampledRir& rir, double c, const PeakDetectOptions& options) {
  if (!(rir.fs > 0.0)) throw InvalidArgument("fs must be positive");
  if (rir.samples.empty()) throw InvalidArgument("signal is empty");
  if (!(c > 0.0)) throw InvalidArgument("speed of sound must be positive");
  if (!(options.delta_samples > 0.0)) throw InvalidArgument("delta_samples must be positive");

  std::size_t n = rir.samples.size();
  if (options.window_end > 0) n = std::min(n, options.window_end);
  const std::span<const float> signal(rir.samples.data(), n);

  const std::vector<float> env = simd::abs_envelope(signal);
  const float peak = simd::max_value(env);
  if (!(peak > 0.0f)) throw NoPeakFound("no peak found: signal is silent");
  const float threshold = static_cast<float>(options.min_rel_amp * peak);

  const std::vector<std::uint32_t> maxima = simd::local_maxima(env, threshold);
  if (maxima.empty()) throw NoPeakFound("no peak found above threshold");

  std::vector<PathEntry> entries;
  entries.reserve(maxima.size());
  for (std::uint32_t i : maxima) {
    const RefinedPeak r = parabolic_refine(env, i);
    entries.push_back({r.position / rir.fs * c, r.height});
  }
  if (options.max_count > 0 && entries.size() > options.max_count) {
    std::partial_sort(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(options.max_count),
                      entries.end(), [](const PathEntry& a, const PathEntry& b) { return a.a > b.a; });
    entries.resize(options.max_count);
  }

  PathLengthSet set;
  set.c = c;
  set.tol = options.delta_samples / rir.fs * c;
  set.entries = merge_close_entries(std::move(entries), set.tol);
  return set;
}

}  // namespace roomest
