// roomest: synthesize RIRs, estimate room configurations, list degenerate
// relabellings and run randomized experiments.

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "roomest/bench_harness.hpp"
#include "roomest/degeneracy.hpp"
#include "roomest/error.hpp"
#include "roomest/io.hpp"

namespace {

using namespace roomest;

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

struct SynthArgs {
  std::string room, wav, pulses;
  int order = 2;
  double fs = 44100.0;
  std::size_t len = 0;
};

int run_synth(const SynthArgs& a) {
  const RoomConfig room = read_room_config(a.room);
  const PulseList pulses = enumerate_pulses(room, a.order);
  write_json_file(a.pulses, json(pulses));
  if (!a.wav.empty()) {
    std::size_t len = a.len;
    if (len == 0) {
      const double last = pulses.empty() ? 0.0 : pulses.back().toa;
      len = static_cast<std::size_t>(std::ceil(last * a.fs)) + 2 * RenderOptions{}.half_width;
    }
    const SampledRir rir = render_rir(pulses, a.fs, len);
    if (ends_with(a.wav, ".csv"))
      write_csv(a.wav, rir);
    else
      write_wav(a.wav, rir);
  }
  return 0;
}

struct EstimateArgs {
  std::string pulses, wav, out;
  double fs = 0.0;
  double c = 343.0;
  double delta_samples = 5.0;
};

int run_estimate(const EstimateArgs& a) {
  PathLengthSet set;
  if (!a.pulses.empty()) {
    const json j = read_json_file(a.pulses);
    if (!j.is_array()) throw InvalidArgument(a.pulses + ": expected a JSON array");
    const double fs = a.fs > 0.0 ? a.fs : 44100.0;
    const double tol = a.delta_samples / fs * a.c;
    if (!j.empty() && j.front().contains("d")) {
      set.entries = merge_close_entries(j.get<std::vector<PathEntry>>(), tol);
      set.c = a.c;
      set.tol = tol;
    } else {
      const PulseList pulses = j.get<PulseList>();
      set = pulses_to_pathlengths(pulses, a.c, tol);
    }
  } else {
    SampledRir rir = ends_with(a.wav, ".csv") ? read_csv(a.wav, a.fs) : read_wav(a.wav);
    if (a.fs > 0.0) rir.fs = a.fs;
    PeakDetectOptions opts;
    opts.delta_samples = a.delta_samples;
    set = detect_peaks(rir, a.c, opts);
  }

  const RoomEstimate est = estimate_room(set);
  json j = estimate_to_json(est);
  j["c"] = a.c;
  j["diagnostics"]["path_lengths"] = path_set_to_json(set);
  if (a.out.empty())
    std::cout << j.dump(2) << '\n';
  else
    write_json_file(a.out, j);
  if (!est.closure_ok) std::cerr << "warning: estimate does not reproduce all observed arrivals\n";
  return 0;
}

int run_degeneracy(const std::string& room_path, bool extended) {
  const RoomConfig room = read_room_config(room_path);
  if (extended) {
    for (const DegeneracyTransform& t : all_transforms(DegeneracyGroup::kFull))
      std::cout << json(apply(t, room)).dump() << '\n';
    return 0;
  }
  for (const RoomConfig& r : equivalents(room)) std::cout << json(r).dump() << '\n';
  return 0;
}

struct ExperimentArgs {
  std::size_t rooms = 200;
  std::uint64_t seed = 1;
  std::string mode = "sampled";
  double toa_jitter = 0.0;
  int spurious = 0;
  int dropped = 0;
  std::string report;
  double delta_samples = 5.0;
};

int run_experiment_cmd(const ExperimentArgs& a) {
  ExperimentSettings s;
  s.n_rooms = a.rooms;
  s.seed = a.seed;
  s.mode = a.mode == "exact" ? ExperimentMode::kExactPulses : ExperimentMode::kSampled;
  s.delta_samples = a.delta_samples;
  s.perturbation.toa_jitter = a.toa_jitter / s.fs;
  s.perturbation.n_spurious = a.spurious;
  s.perturbation.n_dropped = a.dropped;
  const ExperimentTable table = run_experiment(s);
  const std::string text = ends_with(a.report, ".json") ? format_report_json(table, s) : format_report_csv(table);
  if (a.report.empty() || a.report == "-") {
    std::cout << text;
  } else {
    std::ofstream out(a.report);
    if (!out) throw InvalidArgument("cannot write " + a.report);
    out << text;
  }
  std::cerr << "rooms " << table.rooms.size() << ", failed " << table.n_failed << ", geometry rmse "
            << table.geometry_rmse << " m\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Room geometry and reflection coefficient estimation from a single RIR"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* sc = app.add_subcommand("synth", "Image-source pulses (and optionally a sampled RIR) for a room");
  sc->add_option("--room", synth.room, "RoomConfig JSON")->required()->check(CLI::ExistingFile);
  sc->add_option("--order", synth.order, "Maximum reflection order")->required()->check(CLI::Range(0, 50));
  sc->add_option("--fs", synth.fs, "Sample rate in Hz")->check(CLI::PositiveNumber);
  sc->add_option("--len", synth.len, "RIR length in samples (default: fits every pulse)");
  sc->add_option("--wav", synth.wav, "Rendered RIR output (.wav, or .csv with sidecar)");
  sc->add_option("--pulses", synth.pulses, "PulseList JSON output")->required();

  EstimateArgs est;
  auto* ec = app.add_subcommand("estimate", "Estimate a room configuration");
  auto* ep = ec->add_option("--pulses", est.pulses, "PulseList or PathLengthSet JSON")->check(CLI::ExistingFile);
  auto* ew = ec->add_option("--wav", est.wav, "Sampled RIR (.wav or .csv)")->check(CLI::ExistingFile);
  ep->excludes(ew);
  ec->add_option("--fs", est.fs, "Sample rate in Hz (overrides the file)")->check(CLI::PositiveNumber);
  ec->add_option("--c", est.c, "Speed of sound in m/s")->check(CLI::PositiveNumber);
  ec->add_option("--delta-samples", est.delta_samples, "Peak merge distance in samples")
      ->check(CLI::PositiveNumber);
  ec->add_option("--out", est.out, "Estimate JSON output (default stdout)");

  std::string deg_room;
  bool deg_list = false;
  bool deg_extended = false;
  auto* dc = app.add_subcommand("degeneracy", "Configurations that share the same RIR");
  dc->add_option("--room", deg_room, "RoomConfig JSON")->required()->check(CLI::ExistingFile);
  dc->add_flag("--list", deg_list, "Print orbit members as JSON lines")->required();
  dc->add_flag("--extended", deg_extended, "Include per-axis source/receiver exchanges");

  ExperimentArgs exp;
  auto* xc = app.add_subcommand("experiment", "Randomized rooms through the full pipeline");
  xc->add_option("--rooms", exp.rooms, "Number of rooms")->check(CLI::PositiveNumber);
  xc->add_option("--seed", exp.seed, "Experiment seed");
  xc->add_option("--mode", exp.mode, "exact or sampled")->check(CLI::IsMember({"exact", "sampled"}));
  xc->add_option("--toa-jitter", exp.toa_jitter, "Uniform TOA jitter bound in samples")
      ->check(CLI::NonNegativeNumber);
  xc->add_option("--spurious", exp.spurious, "Spurious pulses per room")->check(CLI::NonNegativeNumber);
  xc->add_option("--dropped", exp.dropped, "Dropped pulses per room")->check(CLI::NonNegativeNumber);
  xc->add_option("--delta-samples", exp.delta_samples, "Peak merge distance in samples")
      ->check(CLI::PositiveNumber);
  xc->add_option("--report", exp.report, "Report path (.csv or .json)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sc->parsed()) return run_synth(synth);
    if (ec->parsed()) {
      if (est.pulses.empty() && est.wav.empty()) throw InvalidArgument("estimate needs --pulses or --wav");
      return run_estimate(est);
    }
    if (dc->parsed()) return run_degeneracy(deg_room, deg_extended);
    if (xc->parsed()) return run_experiment_cmd(exp);
  } catch (const EstimationFailure& e) {
    std::cerr << "estimation failed: " << e.what() << " (" << e.solved_count() << " of 3 directions solved)\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
