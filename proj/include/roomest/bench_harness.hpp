#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "roomest/acoustic_model.hpp"
#include "roomest/degeneracy.hpp"
#include "roomest/geometry_estimator.hpp"
#include "roomest/pulse_extraction.hpp"

namespace roomest {

enum class ExperimentMode { kExactPulses, kSampled };

struct ExperimentSettings {
  std::size_t n_rooms = 200;
  Vec3 dims_low{2.0, 5.0, 7.0};
  Vec3 dims_high{4.0, 10.0, 11.0};
  double beta_low = 0.0;
  double beta_high = 1.0;
  double fs = 44100.0;
  std::size_t rir_len = 127890;
  double c = 343.0;
  double delta_samples = 5.0;
  double wall_margin = 0.1;
  Perturbation perturbation;  // seed is ignored; each room derives its own
  std::uint64_t seed = 1;
  ExperimentMode mode = ExperimentMode::kExactPulses;
  PeakDetectOptions detect;  // delta_samples is overwritten from above
  RenderOptions render;
  EstimatorOptions estimator;

  void validate() const;
  double tol() const { return c * delta_samples / fs; }
};

/// Deterministic for (settings.seed, index).
RoomConfig random_room(const ExperimentSettings& settings, std::size_t index);

struct RoomOutcome {
  std::size_t index = 0;
  RoomConfig truth;
  std::optional<RoomConfig> estimate;
  ErrorReport errors;
  bool failed = false;
  std::string failure_reason;
  bool used_fallback = false;
  std::size_t spurious_present = 0;   // spurious entries distinguishable in the input set
  std::size_t spurious_reported = 0;  // of those, reported as unexplained
};

struct ExperimentTable {
  std::vector<RoomOutcome> rooms;
  double geometry_rmse = 0.0;
  double receiver_rmse = 0.0;
  double source_rmse = 0.0;
  double beta_rmse = 0.0;
  std::size_t n_failed = 0;
  double failure_rate = 0.0;
};

/// Runs one room through the pipeline; failures are recorded, not thrown.
RoomOutcome run_room(const ExperimentSettings& settings, std::size_t index);

ExperimentTable run_experiment(const ExperimentSettings& settings);

/// quantity,rmse,n_rooms,n_failed,failure_rate
std::string format_report_csv(const ExperimentTable& table);
std::string format_report_json(const ExperimentTable& table, const ExperimentSettings& settings);

}  // namespace roomest
