#include "roomest/bench_harness.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include <json.hpp>

#include "roomest/error.hpp"

namespace roomest {

namespace {

std::mt19937_64 room_rng(std::uint64_t seed, std::size_t index, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    stream};
  return std::mt19937_64(seq);
}

constexpr std::uint32_t kRoomStream = 0;
constexpr std::uint32_t kPerturbStream = 1;

// Upper bound on any order-2 path length for rooms drawn from these settings.
double max_order2_path(const ExperimentSettings& s) {
  const double diag = std::sqrt(s.dims_high[0] * s.dims_high[0] + s.dims_high[1] * s.dims_high[1] +
                                s.dims_high[2] * s.dims_high[2]);
  return 3.0 * diag;
}

}  // namespace

void ExperimentSettings::validate() const {
  for (std::size_t a = 0; a < 3; ++a) {
    if (!(dims_low[a] > 0.0 && dims_low[a] < dims_high[a]))
      throw InvalidArgument("dims_low must be positive and below dims_high");
    if (!(2.0 * wall_margin < dims_low[a])) throw InvalidArgument("wall margin too large for the room");
  }
  if (!(beta_low >= 0.0 && beta_low <= beta_high && beta_high <= 1.0))
    throw InvalidArgument("beta range must lie inside [0, 1]");
  if (!(fs > 0.0 && c > 0.0 && delta_samples > 0.0))
    throw InvalidArgument("fs, c and delta_samples must be positive");
  if (wall_margin < 0.0) throw InvalidArgument("wall margin must be non-negative");
}

RoomConfig random_room(const ExperimentSettings& settings, std::size_t index) {
  auto rng = room_rng(settings.seed, index, kRoomStream);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RoomConfig room;
  room.c = settings.c;
  for (std::size_t a = 0; a < 3; ++a)
    room.dims[a] = settings.dims_low[a] + unit(rng) * (settings.dims_high[a] - settings.dims_low[a]);
  const double m = settings.wall_margin;
  for (std::size_t a = 0; a < 3; ++a) room.source[a] = m + unit(rng) * (room.dims[a] - 2.0 * m);
  for (std::size_t a = 0; a < 3; ++a) room.receiver[a] = m + unit(rng) * (room.dims[a] - 2.0 * m);
  for (double& b : room.betas) b = settings.beta_low + unit(rng) * (settings.beta_high - settings.beta_low);
  return room;
}

RoomOutcome run_room(const ExperimentSettings& settings, std::size_t index) {
  RoomOutcome out;
  out.index = index;
  out.truth = random_room(settings, index);
  const double tol = settings.tol();

  try {
    PulseList pulses = enumerate_pulses(out.truth, 2);
    if (!settings.perturbation.is_identity()) {
      Perturbation p = settings.perturbation;
      p.seed = room_rng(settings.seed, index, kPerturbStream)();
      pulses = perturb_pulses(pulses, p);
    }

    PathLengthSet set;
    if (settings.mode == ExperimentMode::kExactPulses) {
      set = pulses_to_pathlengths(pulses, settings.c, tol);
    } else {
      const double horizon = max_order2_path(settings) / settings.c * settings.fs;
      const auto needed = static_cast<std::size_t>(std::ceil(horizon)) +
                          static_cast<std::size_t>(settings.render.half_width) + 2;
      const std::size_t length = std::min(settings.rir_len, needed);
      const SampledRir rir = render_rir(pulses, settings.fs, length, settings.render);
      PeakDetectOptions detect = settings.detect;
      detect.delta_samples = settings.delta_samples;
      set = detect_peaks(rir, settings.c, detect);
    }

    const RoomEstimate est = estimate_room(set, settings.estimator);
    out.estimate = est.estimate.config;
    out.used_fallback = est.used_fallback;
    out.errors = aligned_errors(out.truth, est.estimate.config);

    // A spurious pulse counts when no true arrival lies within tol of it and
    // it survived as its own entry, nearer to it than to any true arrival.
    std::vector<double> truth_d;
    for (const Pulse& p : pulses)
      if (!p.spurious) truth_d.push_back(p.path_length);
    auto nearest_truth = [&](double d) {
      double best = std::numeric_limits<double>::infinity();
      for (double t : truth_d) best = std::min(best, std::abs(t - d));
      return best;
    };
    for (const Pulse& p : pulses) {
      if (!p.spurious || nearest_truth(p.path_length) <= tol) continue;
      const PathEntry* entry = nullptr;
      for (const PathEntry& e : set.entries)
        if (std::abs(e.d - p.path_length) <= tol &&
            (!entry || std::abs(e.d - p.path_length) < std::abs(entry->d - p.path_length)))
          entry = &e;
      if (!entry || nearest_truth(entry->d) <= std::abs(entry->d - p.path_length)) continue;
      ++out.spurious_present;
      const bool reported = std::any_of(est.unexplained.begin(), est.unexplained.end(),
                                        [&](const PathEntry& u) { return u.d == entry->d; });
      if (reported) ++out.spurious_reported;
    }

    if (!est.coefficients.valid) {
      out.failed = true;
      out.failure_reason = "reflection coefficient outside [0, 1 + eps]";
    } else if (out.errors.failed) {
      out.failed = true;
      out.failure_reason = "rmse above 1";
    }
  } catch (const Error& e) {
    out.failed = true;
    out.failure_reason = e.what();
  }
  return out;
}

ExperimentTable run_experiment(const ExperimentSettings& settings) {
  settings.validate();
  ExperimentTable table;
  table.rooms.reserve(settings.n_rooms);
  for (std::size_t i = 0; i < settings.n_rooms; ++i) table.rooms.push_back(run_room(settings, i));

  double g = 0.0, r = 0.0, s = 0.0, b = 0.0;
  std::size_t ok = 0;
  for (const RoomOutcome& room : table.rooms) {
    if (room.failed) {
      ++table.n_failed;
      continue;
    }
    ++ok;
    g += room.errors.geometry_rmse * room.errors.geometry_rmse;
    r += room.errors.receiver_rmse * room.errors.receiver_rmse;
    s += room.errors.source_rmse * room.errors.source_rmse;
    b += room.errors.beta_rmse * room.errors.beta_rmse;
  }
  // Per-room RMSEs are already component means, so pooling their squares
  // over rooms equals pooling over rooms and components.
  if (ok > 0) {
    const auto n = static_cast<double>(ok);
    table.geometry_rmse = std::sqrt(g / n);
    table.receiver_rmse = std::sqrt(r / n);
    table.source_rmse = std::sqrt(s / n);
    table.beta_rmse = std::sqrt(b / n);
  }
  table.failure_rate =
      table.rooms.empty() ? 0.0 : static_cast<double>(table.n_failed) / static_cast<double>(table.rooms.size());
  return table;
}

std::string format_report_csv(const ExperimentTable& table) {
  std::ostringstream out;
  out << "quantity,rmse,n_rooms,n_failed,failure_rate\n";
  out << std::setprecision(10);
  const std::pair<const char*, double> rows[] = {
      {"geometry", table.geometry_rmse},
      {"receiver", table.receiver_rmse},
      {"source", table.source_rmse},
      {"reflection_coefficients", table.beta_rmse},
  };
  for (const auto& [name, value] : rows) {
    out << name << ',' << value << ',' << table.rooms.size() << ',' << table.n_failed << ','
        << table.failure_rate << '\n';
  }
  return out.str();
}

std::string format_report_json(const ExperimentTable& table, const ExperimentSettings& settings) {
  nlohmann::json j;
  j["n_rooms"] = table.rooms.size();
  j["n_failed"] = table.n_failed;
  j["failure_rate"] = table.failure_rate;
  j["rmse"] = {{"geometry", table.geometry_rmse},
               {"receiver", table.receiver_rmse},
               {"source", table.source_rmse},
               {"reflection_coefficients", table.beta_rmse}};
  j["alignment"] = "minimum over source/receiver-exchange, mirror and axis-permutation relabellings";
  j["settings"] = {{"mode", settings.mode == ExperimentMode::kExactPulses ? "exact" : "sampled"},
                   {"seed", settings.seed},
                   {"fs", settings.fs},
                   {"c", settings.c},
                   {"delta_samples", settings.delta_samples},
                   {"beta_range", {settings.beta_low, settings.beta_high}},
                   {"toa_jitter_s", settings.perturbation.toa_jitter},
                   {"spurious", settings.perturbation.n_spurious},
                   {"dropped", settings.perturbation.n_dropped}};
  nlohmann::json rooms = nlohmann::json::array();
  for (const RoomOutcome& r : table.rooms) {
    nlohmann::json row{{"index", r.index},
                       {"failed", r.failed},
                       {"used_fallback", r.used_fallback},
                       {"geometry_rmse", r.errors.geometry_rmse},
                       {"receiver_rmse", r.errors.receiver_rmse},
                       {"source_rmse", r.errors.source_rmse},
                       {"beta_rmse", r.errors.beta_rmse}};
    if (r.failed) row["reason"] = r.failure_reason;
    rooms.push_back(row);
  }
  j["rooms"] = rooms;
  return j.dump(2);
}

}  // namespace roomest
