#include "roomest/degeneracy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "roomest/error.hpp"

namespace roomest {

namespace {

std::vector<std::array<int, 3>> permutations() {
  std::vector<std::array<int, 3>> out;
  std::array<int, 3> p{0, 1, 2};
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

std::array<bool, 3> mask_bits(int mask) {
  return {(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0};
}

// Generic room used to identify transforms by their action.
RoomConfig probe_room() {
  RoomConfig r;
  r.dims = {3.1, 4.7, 5.9};
  r.source = {0.7, 1.3, 2.9};
  r.receiver = {2.2, 3.1, 0.4};
  r.betas = {0.11, 0.23, 0.37, 0.41, 0.53, 0.67};
  return r;
}

double sq(double x) { return x * x; }

double rmse3(const Vec3& a, const Vec3& b) {
  return std::sqrt((sq(a[0] - b[0]) + sq(a[1] - b[1]) + sq(a[2] - b[2])) / 3.0);
}

double max_abs3(const Vec3& a, const Vec3& b) {
  return std::max({std::abs(a[0] - b[0]), std::abs(a[1] - b[1]), std::abs(a[2] - b[2])});
}

}  // namespace

std::vector<DegeneracyTransform> all_transforms(DegeneracyGroup group) {
  std::vector<DegeneracyTransform> out;
  for (const auto& perm : permutations()) {
    for (int mirror = 0; mirror < 8; ++mirror) {
      if (group == DegeneracyGroup::kStandard) {
        for (int swap = 0; swap < 2; ++swap) {
          DegeneracyTransform t;
          t.axis_permutation = perm;
          t.mirror = mask_bits(mirror);
          t.swap_sr = swap != 0;
          out.push_back(t);
        }
      } else {
        for (int exchange = 0; exchange < 8; ++exchange) {
          DegeneracyTransform t;
          t.axis_permutation = perm;
          t.mirror = mask_bits(mirror);
          t.axis_exchange = mask_bits(exchange);
          out.push_back(t);
        }
      }
    }
  }
  return out;
}

RoomConfig apply(const DegeneracyTransform& t, const RoomConfig& config) {
  RoomConfig out = config;
  for (std::size_t a = 0; a < 3; ++a) {
    const auto from = static_cast<std::size_t>(t.axis_permutation[a]);
    out.dims[a] = config.dims[from];
    out.source[a] = config.source[from];
    out.receiver[a] = config.receiver[from];
    out.betas[2 * a] = config.betas[2 * from];
    out.betas[2 * a + 1] = config.betas[2 * from + 1];
  }
  for (std::size_t a = 0; a < 3; ++a) {
    if (!t.mirror[a]) continue;
    out.source[a] = out.dims[a] - out.source[a];
    out.receiver[a] = out.dims[a] - out.receiver[a];
    std::swap(out.betas[2 * a], out.betas[2 * a + 1]);
  }
  if (t.swap_sr) std::swap(out.source, out.receiver);
  for (std::size_t a = 0; a < 3; ++a) {
    if (t.axis_exchange[a]) std::swap(out.source[a], out.receiver[a]);
  }
  return out;
}

bool approx_equal(const RoomConfig& a, const RoomConfig& b, double tol) {
  for (std::size_t i = 0; i < 3; ++i) {
    if (std::abs(a.dims[i] - b.dims[i]) > tol) return false;
    if (std::abs(a.source[i] - b.source[i]) > tol) return false;
    if (std::abs(a.receiver[i] - b.receiver[i]) > tol) return false;
  }
  for (std::size_t w = 0; w < 6; ++w)
    if (std::abs(a.betas[w] - b.betas[w]) > tol) return false;
  return std::abs(a.c - b.c) <= tol;
}

DegeneracyTransform compose(const DegeneracyTransform& second, const DegeneracyTransform& first) {
  const RoomConfig probe = probe_room();
  const RoomConfig target = apply(second, apply(first, probe));
  for (const auto& t : all_transforms(DegeneracyGroup::kFull)) {
    if (approx_equal(apply(t, probe), target, 1e-12)) return t;
  }
  throw InvalidArgument("composition left the transform group");
}

DegeneracyTransform inverse(const DegeneracyTransform& t) {
  const RoomConfig probe = probe_room();
  const RoomConfig moved = apply(t, probe);
  for (const auto& candidate : all_transforms(DegeneracyGroup::kFull)) {
    if (approx_equal(apply(candidate, moved), probe, 1e-12)) return candidate;
  }
  throw InvalidArgument("transform has no inverse in the group");
}

std::vector<RoomConfig> equivalents(const RoomConfig& config, DegeneracyGroup group) {
  std::vector<RoomConfig> out;
  for (const auto& t : all_transforms(group)) {
    RoomConfig c = apply(t, config);
    const bool seen = std::any_of(out.begin(), out.end(),
                                  [&](const RoomConfig& o) { return approx_equal(o, c); });
    if (!seen) out.push_back(c);
  }
  return out;
}

RoomConfig canonical(const RoomConfig& config) {
  const auto orbit = equivalents(config);
  return *std::min_element(orbit.begin(), orbit.end(), [](const RoomConfig& a, const RoomConfig& b) {
    return std::tie(a.dims, a.source, a.receiver) < std::tie(b.dims, b.source, b.receiver);
  });
}

ErrorReport aligned_errors(const RoomConfig& truth, const RoomConfig& est, DegeneracyGroup group) {
  ErrorReport best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (const auto& t : all_transforms(group)) {
    const RoomConfig ref = apply(t, truth);
    ErrorReport r;
    r.geometry_rmse = rmse3(ref.dims, est.dims);
    r.receiver_rmse = rmse3(ref.receiver, est.receiver);
    r.source_rmse = rmse3(ref.source, est.source);
    const double cost = r.geometry_rmse + r.receiver_rmse + r.source_rmse;
    if (cost >= best_cost) continue;
    best_cost = cost;
    double beta_sq = 0.0;
    double beta_max = 0.0;
    for (std::size_t w = 0; w < 6; ++w) {
      const double d = ref.betas[w] - est.betas[w];
      beta_sq += d * d;
      beta_max = std::max(beta_max, std::abs(d));
    }
    r.beta_rmse = std::sqrt(beta_sq / 6.0);
    r.max_abs_geometry = max_abs3(ref.dims, est.dims);
    r.max_abs_position =
        std::max(max_abs3(ref.source, est.source), max_abs3(ref.receiver, est.receiver));
    r.max_abs_beta = beta_max;
    r.alignment = t;
    best = r;
  }
  best.failed = best.geometry_rmse > kFailureRmse || best.receiver_rmse > kFailureRmse ||
                best.source_rmse > kFailureRmse || best.beta_rmse > kFailureRmse;
  return best;
}

}  // namespace roomest
