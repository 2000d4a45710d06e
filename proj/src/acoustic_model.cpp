#include "roomest/acoustic_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include "roomest/error.hpp"
#include "roomest/simd/kernels.hpp"

namespace roomest {

void RoomConfig::validate() const {
  auto fail = [](const std::string& what) { throw InvalidArgument("invalid room config: " + what); };
  for (std::size_t a = 0; a < 3; ++a) {
    if (!(dims[a] > 0.0) || !std::isfinite(dims[a])) fail("dimensions must be positive");
    if (!(source[a] > 0.0 && source[a] < dims[a])) fail("source outside the room");
    if (!(receiver[a] > 0.0 && receiver[a] < dims[a])) fail("receiver outside the room");
  }
  for (double b : betas) {
    if (!(b >= 0.0 && b <= 1.0)) fail("reflection coefficient outside [0, 1]");
  }
  if (!(c > 0.0) || !std::isfinite(c)) fail("speed of sound must be positive");
}

int reflection_order(const ImageIndex& index) {
  int order = 0;
  for (std::size_t a = 0; a < 3; ++a) order += std::abs(2 * index.m[a] - index.p[a]);
  return order;
}

Vec3 image_source_position(const RoomConfig& config, const ImageIndex& index) {
  Vec3 pos{};
  for (std::size_t a = 0; a < 3; ++a) {
    pos[a] = 2.0 * index.m[a] * config.dims[a] + (1 - 2 * index.p[a]) * config.source[a];
  }
  return pos;
}

double reflection_gain(const RoomConfig& config, const ImageIndex& index) {
  double gain = 1.0;
  for (std::size_t a = 0; a < 3; ++a) {
    const int near_hits = std::abs(index.m[a] - index.p[a]);
    const int far_hits = std::abs(index.m[a]);
    gain *= std::pow(config.betas[2 * a], near_hits) * std::pow(config.betas[2 * a + 1], far_hits);
  }
  return gain;
}

PulseList enumerate_pulses(const RoomConfig& config, int max_order) {
  config.validate();
  if (max_order < 0) throw InvalidArgument("max_order must be >= 0");

  // |2m - q| <= max_order bounds |m| by max_order / 2 + 1.
  const int m_bound = max_order / 2 + 1;
  PulseList pulses;
  ImageIndex idx;
  for (int q = 0; q <= 1; ++q)
    for (int j = 0; j <= 1; ++j)
      for (int k = 0; k <= 1; ++k)
        for (int mx = -m_bound; mx <= m_bound; ++mx)
          for (int my = -m_bound; my <= m_bound; ++my)
            for (int mz = -m_bound; mz <= m_bound; ++mz) {
              idx.p = {q, j, k};
              idx.m = {mx, my, mz};
              const int order = reflection_order(idx);
              if (order > max_order) continue;
              const double d = distance(image_source_position(config, idx), config.receiver);
              Pulse pulse;
              pulse.index = idx;
              pulse.order = order;
              pulse.path_length = d;
              pulse.toa = d / config.c;
              pulse.amplitude = reflection_gain(config, idx) / (4.0 * kPi * d);
              pulses.push_back(pulse);
            }

  std::sort(pulses.begin(), pulses.end(), [](const Pulse& a, const Pulse& b) {
    if (a.toa != b.toa) return a.toa < b.toa;
    return a.index < b.index;
  });
  return pulses;
}

SampledRir render_rir(std::span<const Pulse> pulses, double fs, std::size_t length,
                      const RenderOptions& options) {
  if (!(fs > 0.0)) throw InvalidArgument("fs must be positive");
  if (options.half_width < 1) throw InvalidArgument("kernel half width must be >= 1");

  SampledRir rir;
  rir.fs = fs;
  rir.samples.assign(length, 0.0f);
  const double duration = static_cast<double>(length) / fs;
  const auto hw = static_cast<double>(options.half_width);

  for (std::size_t i = 0; i < pulses.size(); ++i) {
    const Pulse& p = pulses[i];
    if (!(p.toa >= 0.0) || p.toa >= duration) {
      std::ostringstream msg;
      msg << "pulse " << i << " (order " << p.order << ", p=(" << p.index.p[0] << ","
          << p.index.p[1] << "," << p.index.p[2] << "), m=(" << p.index.m[0] << ","
          << p.index.m[1] << "," << p.index.m[2] << "), toa " << p.toa
          << " s) lies beyond the signal length of " << duration << " s";
      throw PulseOutOfRange(msg.str());
    }
    // Work in a local frame starting at the first tap so the kernel sees a
    // small centre offset; keeps float arithmetic exact enough.
    const double pos = p.toa * fs;
    const auto first = static_cast<std::ptrdiff_t>(std::floor(pos - hw)) + 1;
    const auto last = static_cast<std::ptrdiff_t>(std::ceil(pos + hw)) - 1;
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(first, 0);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(last, static_cast<std::ptrdiff_t>(length) - 1);
    if (hi < lo) continue;
    std::span<float> window(rir.samples.data() + lo, static_cast<std::size_t>(hi - lo + 1));
    simd::accumulate_windowed_sinc(window, pos - static_cast<double>(lo),
                                   static_cast<float>(p.amplitude), hw);
  }
  return rir;
}

PulseList perturb_pulses(std::span<const Pulse> pulses, const Perturbation& perturbation) {
  if (perturbation.toa_jitter < 0.0 || perturbation.amp_jitter < 0.0 ||
      perturbation.n_spurious < 0 || perturbation.n_dropped < 0) {
    throw InvalidArgument("perturbation parameters must be non-negative");
  }
  PulseList out(pulses.begin(), pulses.end());
  if (perturbation.is_identity()) return out;
  if (out.empty()) throw InvalidArgument("cannot perturb an empty pulse list");

  std::mt19937_64 rng(perturbation.seed);

  // The direct path is the order-0 pulse, or the earliest one if absent.
  auto direct_it = std::find_if(out.begin(), out.end(), [](const Pulse& p) {
    return p.order == 0 && !p.spurious;
  });
  if (direct_it == out.end()) {
    direct_it = std::min_element(out.begin(), out.end(),
                                 [](const Pulse& a, const Pulse& b) { return a.toa < b.toa; });
  }
  const std::size_t direct = static_cast<std::size_t>(direct_it - out.begin());

  const auto droppable = out.size() - 1;
  if (static_cast<std::size_t>(perturbation.n_dropped) > droppable) {
    throw InvalidArgument("cannot drop " + std::to_string(perturbation.n_dropped) +
                          " pulses from a list with " + std::to_string(droppable) +
                          " non-direct pulses");
  }

  const double t_direct = out[direct].toa;
  double t_max = t_direct;
  double a_min = out[0].amplitude, a_max = out[0].amplitude;
  for (const Pulse& p : out) {
    t_max = std::max(t_max, p.toa);
    a_min = std::min(a_min, p.amplitude);
    a_max = std::max(a_max, p.amplitude);
  }

  if (perturbation.toa_jitter > 0.0 || perturbation.amp_jitter > 0.0) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (Pulse& p : out) {
      const double speed = p.toa > 0.0 ? p.path_length / p.toa : 0.0;
      const double dt = perturbation.toa_jitter * unit(rng);
      const double scale = 1.0 + perturbation.amp_jitter * unit(rng);
      p.toa = std::max(0.0, p.toa + dt);
      p.path_length = p.toa * speed;
      p.amplitude *= scale;
    }
  }

  if (perturbation.n_dropped > 0) {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < out.size(); ++i)
      if (i != direct) candidates.push_back(i);
    std::shuffle(candidates.begin(), candidates.end(), rng);
    candidates.resize(static_cast<std::size_t>(perturbation.n_dropped));
    std::sort(candidates.rbegin(), candidates.rend());
    for (std::size_t i : candidates) out.erase(out.begin() + static_cast<std::ptrdiff_t>(i));
  }

  if (perturbation.n_spurious > 0) {
    const double speed = t_direct > 0.0 ? pulses[direct].path_length / pulses[direct].toa : 0.0;
    std::uniform_real_distribution<double> when(t_direct, t_max);
    std::uniform_real_distribution<double> level(a_min, a_max);
    for (int s = 0; s < perturbation.n_spurious; ++s) {
      Pulse p;
      p.spurious = true;
      p.order = 0;
      p.toa = when(rng);
      p.path_length = p.toa * speed;
      p.amplitude = level(rng);
      out.push_back(p);
    }
  }

  std::stable_sort(out.begin(), out.end(), [](const Pulse& a, const Pulse& b) {
    if (a.toa != b.toa) return a.toa < b.toa;
    return a.index < b.index;
  });
  return out;
}

}  // namespace roomest
