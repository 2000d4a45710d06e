#pragma once

// Forward image-source model of a shoebox room: image enumeration, pulse
// lists, band-limited rendering and a seeded perturbation surrogate.

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "roomest/geometry.hpp"

namespace roomest {

/// Room dimensions, source/receiver positions, wall reflection coefficients
/// and speed of sound. Betas are ordered (x1, x2, y1, y2, z1, z2), where the
/// "1" wall of each pair lies at coordinate 0 and the "2" wall at L.
struct RoomConfig {
  Vec3 dims{};
  Vec3 source{};
  Vec3 receiver{};
  std::array<double, 6> betas{1, 1, 1, 1, 1, 1};
  double c = 343.0;

  /// Throws InvalidArgument if any invariant is violated.
  void validate() const;

  double beta_near(Axis a) const { return betas[2 * index_of(a)]; }
  double beta_far(Axis a) const { return betas[2 * index_of(a) + 1]; }

  bool operator==(const RoomConfig&) const = default;
};

/// Image label: p = (q, j, k) in {0,1}^3 and integer shifts m = (mx, my, mz).
struct ImageIndex {
  std::array<int, 3> p{};
  std::array<int, 3> m{};

  auto operator<=>(const ImageIndex&) const = default;
};

struct Pulse {
  ImageIndex index;
  int order = 0;
  double toa = 0.0;          // seconds
  double path_length = 0.0;  // meters
  double amplitude = 0.0;
  bool spurious = false;  // inserted by perturb_pulses, not an image source
};

using PulseList = std::vector<Pulse>;

struct SampledRir {
  std::vector<float> samples;
  double fs = 0.0;

  std::size_t length() const { return samples.size(); }
};

int reflection_order(const ImageIndex& index);

Vec3 image_source_position(const RoomConfig& config, const ImageIndex& index);

/// Product of wall coefficients picked up along the image path.
double reflection_gain(const RoomConfig& config, const ImageIndex& index);

/// All pulses with reflection order <= max_order, sorted by TOA with ties
/// broken by ImageIndex.
PulseList enumerate_pulses(const RoomConfig& config, int max_order);

struct RenderOptions {
  int half_width = 32;  // windowed-sinc half width in samples
};

/// Sums a Hann-windowed sinc per pulse, centred on the fractional sample
/// position toa * fs. Throws PulseOutOfRange for pulses at or past the end.
SampledRir render_rir(std::span<const Pulse> pulses, double fs, std::size_t length,
                      const RenderOptions& options = {});

struct Perturbation {
  double toa_jitter = 0.0;  // seconds, uniform +/-
  double amp_jitter = 0.0;  // fraction, amplitude scaled by U(1 - j, 1 + j)
  int n_spurious = 0;
  int n_dropped = 0;
  std::uint64_t seed = 0;

  bool is_identity() const {
    return toa_jitter == 0.0 && amp_jitter == 0.0 && n_spurious == 0 && n_dropped == 0;
  }
};

/// Surrogate for non-specular effects. Deterministic for a fixed seed.
/// Spurious pulses are drawn between the direct path and the last arrival,
/// with amplitudes inside the existing amplitude range.
PulseList perturb_pulses(std::span<const Pulse> pulses, const Perturbation& perturbation);

}  // namespace roomest
