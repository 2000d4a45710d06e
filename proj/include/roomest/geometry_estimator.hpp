#pragma once

// Recovers wall-pair distances, source/receiver coordinates and wall
// reflection coefficients from classified arrivals.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "roomest/acoustic_model.hpp"
#include "roomest/error.hpp"
#include "roomest/reflection_classifier.hpp"

namespace roomest {

/// Per-axis solution. u = x_s - x_r, v = x_s + x_r, W is the squared
/// source-receiver offset over the other two axes.
struct DirectionSolution {
  double L = 0.0;
  double u = 0.0;
  double v = 0.0;
  double W = 0.0;
  double sibling_pred = 0.0;

  double source() const { return 0.5 * (v + u); }
  double receiver() const { return 0.5 * (v - u); }
};

/// Closed-form wall-pair solve. da is the first-order arrival via the wall at
/// coordinate 0, db via the wall at L, dc the earlier single-direction
/// second-order arrival. Returns nullopt for an inconsistent hypothesis.
std::optional<DirectionSolution> try_solve_direction(double d0, double da, double db,
                                                     double dc) noexcept;

/// Throwing form of try_solve_direction (InconsistentHypothesis).
DirectionSolution solve_direction(double d0, double da, double db, double dc);

struct DirectionDiagnostics {
  DirectionSolution solution;
  PathEntry near;     // used as da, assigned to the wall at 0
  PathEntry far;      // used as db, assigned to the wall at L
  PathEntry second;   // dc
  PathEntry sibling;  // matched against sibling_pred
  double sibling_residual = 0.0;
};

struct EstimatedConfig {
  RoomConfig config;  // betas are 1 until estimate_reflection_coefficients runs
  std::array<DirectionDiagnostics, 3> directions;
  std::vector<PathEntry> erroneous;  // unconsumed s2_single entries plus leftovers
};

/// A direction had no verifiable hypothesis. The solved directions are kept.
class EstimationFailure : public Error {
 public:
  EstimationFailure(Axis axis, std::array<std::optional<DirectionDiagnostics>, 3> partial);

  Axis axis() const { return axis_; }
  const std::array<std::optional<DirectionDiagnostics>, 3>& partial() const { return partial_; }
  int solved_count() const;

 private:
  Axis axis_;
  std::array<std::optional<DirectionDiagnostics>, 3> partial_;
};

/// Iterates s2_single candidates, direction hypotheses and both first-order
/// assignments; accepts a hypothesis when its predicted sibling matches
/// another s2_single entry within tol. Throws EstimationFailure.
EstimatedConfig estimate_configuration(const ClassifiedReflections& cls, double tol);

struct CoefficientEstimate {
  std::array<double, 6> betas{};
  /// Predicted minus measured amplitude of each direction's two
  /// single-direction second-order entries (dc, sibling).
  std::array<double, 6> second_order_residuals{};
  bool valid = true;  // every beta inside [0, 1 + epsilon]
  std::array<bool, 6> refined{};  // replaced by refine_overlapped_coefficients
};

inline constexpr double kBetaSlack = 0.05;

/// A first-order arrival that overlaps other predicted arrivals carries their
/// amplitude too, which can push beta past 1 + epsilon. For those walls only,
/// subtract the overlapping arrivals predicted from the remaining betas and
/// split what is left between first-order arrivals that coincide.
/// `geometry` supplies positions only.
void refine_overlapped_coefficients(const RoomConfig& geometry, const PathLengthSet& set,
                                    CoefficientEstimate& coefficients, double epsilon = kBetaSlack);

CoefficientEstimate estimate_reflection_coefficients(const EstimatedConfig& est,
                                                     double epsilon = kBetaSlack);

struct EstimatorOptions {
  ClassifierOptions classifier;
  /// Closure check tolerance as a multiple of the set tolerance.
  double closure_factor = 2.0;
  /// Run the exhaustive first-order search when the direct route fails.
  bool fallback = true;
  std::size_t fallback_candidate_limit = 20000;
};

/// Least-squares polish of dims and positions against every order-2 arrival
/// matched to its nearest entry within tol, re-matching between rounds.
/// Returns `start` unchanged unless the polish matches at least as many
/// arrivals with a smaller residual.
RoomConfig refine_geometry(const RoomConfig& start, const PathLengthSet& set, double tol);

/// Full pipeline result for one path-length set.
struct RoomEstimate {
  EstimatedConfig estimate;  // config.betas filled in
  CoefficientEstimate coefficients;
  std::optional<ClassifiedReflections> classification;  // empty when found by fallback
  bool used_fallback = false;
  double closure_residual = 0.0;  // max distance of a predicted arrival to the data
  bool closure_ok = false;
  std::vector<PathEntry> unexplained;  // entries matching no predicted arrival
};

/// Max over the order-2 arrivals of `config` of the distance to the nearest
/// entry of `set`.
double closure_residual(const RoomConfig& config, const PathLengthSet& set);

/// Entries of `set` that are not the nearest entry, within tol, of any
/// order-2 arrival of `config`.
std::vector<PathEntry> unexplained_entries(const RoomConfig& config, const PathLengthSet& set,
                                           double tol);

/// Classify, estimate, verify by forward closure. If that route fails or its
/// result does not reproduce the data, searches first-order triples of pairs
/// that satisfy the cross-direction identity and keeps the closure-best
/// solution. Throws ClassificationFailure or EstimationFailure.
RoomEstimate estimate_room(const PathLengthSet& set, const EstimatorOptions& options = {});

}  // namespace roomest
