#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "roomest/geometry.hpp"
#include "roomest/pulse_extraction.hpp"

namespace roomest {

/// Direct path plus the five reflection sets. Axis labels are the
/// classifier's own: "x" is the direction of the first first-order arrival.
struct ClassifiedReflections {
  PathEntry d0;
  std::array<std::vector<PathEntry>, 3> first_order;  // S1_x, S1_y, S1_z
  std::vector<PathEntry> s2_single;
  std::vector<PathEntry> s2_multi;
  std::vector<PathEntry> leftovers;
  double c = 343.0;
  double tol = 0.0;
  std::pair<std::size_t, std::size_t> hypothesis{0, 1};  // input indices of (d0, dx)

  const std::vector<PathEntry>& sx1() const { return first_order[0]; }
  const std::vector<PathEntry>& sy1() const { return first_order[1]; }
  const std::vector<PathEntry>& sz1() const { return first_order[2]; }
  const std::vector<PathEntry>& first(Axis a) const { return first_order[index_of(a)]; }
};

/// |sqrt(d_i^2 + d_j^2 - d_0^2) - d_ij| <= tol. A negative radicand yields false.
bool theorem1_holds(double d_i, double d_j, double d_ij, double d_0, double tol);

struct ClassifierOptions {
  /// Leading arrivals considered for the (d0, dx) pair on retry.
  std::size_t leading = 6;
};

/// One classification pass with d0 = entries[direct] and dx = entries[first].
/// Returns nullopt when the resulting cardinalities do not match.
std::optional<ClassifiedReflections> classify_with_hypothesis(const PathLengthSet& set,
                                                              std::size_t direct,
                                                              std::size_t first);

/// Tries (d0, dx) hypotheses (0,1), (0,2), (1,2), (0,3), ... over the leading
/// arrivals and returns the first pass whose cardinalities match. Throws
/// ClassificationFailure.
ClassifiedReflections classify_reflections(const PathLengthSet& set,
                                           const ClassifierOptions& options = {});

}  // namespace roomest
