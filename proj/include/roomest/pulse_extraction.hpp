#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "roomest/acoustic_model.hpp"

namespace roomest {

struct PathEntry {
  double d = 0.0;  // path length, meters
  double a = 0.0;  // amplitude

  bool operator==(const PathEntry&) const = default;
};

/// Unlabelled arrivals sorted by path length. Entries are at least `tol`
/// apart; `tol` is also the interval half-width used by classification.
struct PathLengthSet {
  std::vector<PathEntry> entries;
  double c = 343.0;
  double tol = 0.0;

  std::size_t size() const { return entries.size(); }
};

/// Sorts entries and collapses runs closer than tol into the entry with the
/// largest amplitude.
std::vector<PathEntry> merge_close_entries(std::vector<PathEntry> entries, double tol);

/// Exact-mode bypass of peak detection: path length = toa * c.
PathLengthSet pulses_to_pathlengths(std::span<const Pulse> pulses, double c, double tol);

struct PeakDetectOptions {
  double delta_samples = 5.0;
  std::size_t max_count = 64;
  double min_rel_amp = 1e-4;
  std::size_t window_end = 0;  // 0 scans the whole signal
};

/// Local maxima of |rir| above min_rel_amp * max|rir|, refined with a
/// three-point parabola. Keeps the max_count largest, returned by path length.
/// Throws NoPeakFound.
PathLengthSet detect_peaks(const SampledRir& rir, double c, const PeakDetectOptions& options = {});

struct RefinedPeak {
  double position = 0.0;  // fractional sample index
  double height = 0.0;
};

/// Vertex of the parabola through (i-1, i, i+1).
RefinedPeak parabolic_refine(std::span<const float> env, std::size_t i);

}  // namespace roomest
