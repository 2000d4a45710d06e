#pragma once

#include <array>
#include <vector>

#include "roomest/acoustic_model.hpp"

namespace roomest {

/// Relabelling of a room that leaves its impulse response unchanged.
///
/// Applied in order: axis permutation (new axis a takes old axis
/// axis_permutation[a]), mirror about L/2 on flagged axes (swapping that
/// axis's beta pair), global source/receiver swap, then per-axis exchange of
/// the source and receiver coordinate.
struct DegeneracyTransform {
  std::array<int, 3> axis_permutation{0, 1, 2};
  std::array<bool, 3> mirror{false, false, false};
  bool swap_sr = false;
  std::array<bool, 3> axis_exchange{false, false, false};

  bool operator==(const DegeneracyTransform&) const = default;
};

enum class DegeneracyGroup {
  /// Axis permutations x mirrors x global swap: 96 elements.
  kStandard,
  /// Axis permutations x mirrors x per-axis source/receiver exchange: 384
  /// elements. Exchanging the two coordinates along a single axis also
  /// preserves every arrival time and amplitude, so this is the full set of
  /// configurations an estimator cannot tell apart.
  kFull,
};

std::vector<DegeneracyTransform> all_transforms(DegeneracyGroup group = DegeneracyGroup::kStandard);

RoomConfig apply(const DegeneracyTransform& t, const RoomConfig& config);

/// The transform equal to applying `second` after `first` (found in the kFull group).
DegeneracyTransform compose(const DegeneracyTransform& second, const DegeneracyTransform& first);

DegeneracyTransform inverse(const DegeneracyTransform& t);

bool approx_equal(const RoomConfig& a, const RoomConfig& b, double tol = 1e-12);

/// Orbit of `config` under the group, deduplicated.
std::vector<RoomConfig> equivalents(const RoomConfig& config,
                                    DegeneracyGroup group = DegeneracyGroup::kStandard);

/// Orbit member with the lexicographically smallest (dims, source, receiver).
RoomConfig canonical(const RoomConfig& config);

struct ErrorReport {
  double geometry_rmse = 0.0;
  double receiver_rmse = 0.0;
  double source_rmse = 0.0;
  double beta_rmse = 0.0;
  double max_abs_geometry = 0.0;
  double max_abs_position = 0.0;
  double max_abs_beta = 0.0;
  bool failed = false;  // any of the four RMSEs above kFailureRmse
  DegeneracyTransform alignment;
};

inline constexpr double kFailureRmse = 1.0;

/// Compares `est` against the orbit member of `truth` that minimises
/// geometry + receiver + source RMSE. Betas follow the chosen relabelling.
ErrorReport aligned_errors(const RoomConfig& truth, const RoomConfig& est,
                           DegeneracyGroup group = DegeneracyGroup::kFull);

}  // namespace roomest
