#include "roomest/reflection_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "roomest/error.hpp"

namespace roomest {

bool theorem1_holds(double d_i, double d_j, double d_ij, double d_0, double tol) {
  const double radicand = d_i * d_i + d_j * d_j - d_0 * d_0;
  if (radicand < 0.0) return false;
  return std::abs(std::sqrt(radicand) - d_ij) <= tol;
}

namespace {

enum class Role { kFree, kDirect, kFirstX, kFirstY, kFirstZ, kMulti, kLeftover };

constexpr Role first_role(std::size_t axis) {
  return axis == 0 ? Role::kFirstX : (axis == 1 ? Role::kFirstY : Role::kFirstZ);
}

struct Pass {
  const std::vector<PathEntry>& e;
  double tol;
  std::size_t begin;  // first index of the working pool
  std::vector<Role> role;

  // Free pool entries k != skip with |d_k - sqrt(di^2 + dj^2 - d0^2)| <= tol.
  std::vector<std::size_t> match(double di, double dj, double d0, std::size_t skip) const {
    std::vector<std::size_t> out;
    const double radicand = di * di + dj * dj - d0 * d0;
    if (radicand < 0.0) return out;
    const double target = std::sqrt(radicand);
    auto it = std::lower_bound(e.begin() + static_cast<std::ptrdiff_t>(begin), e.end(), target - tol,
                               [](const PathEntry& p, double v) { return p.d < v; });
    for (; it != e.end() && it->d <= target + tol; ++it) {
      const auto k = static_cast<std::size_t>(it - e.begin());
      if (k != skip && role[k] == Role::kFree) out.push_back(k);
    }
    return out;
  }

  void mark(const std::vector<std::size_t>& ks, Role r) {
    for (std::size_t k : ks) role[k] = r;
  }

  // Whether some entry other than i and j sits where the cross-direction
  // arrival of (i, j) would be, whatever its current role.
  bool pairs(std::size_t i, std::size_t j, double d0) const {
    const double radicand = e[i].d * e[i].d + e[j].d * e[j].d - d0 * d0;
    if (radicand < 0.0) return false;
    const double target = std::sqrt(radicand);
    auto it = std::lower_bound(e.begin(), e.end(), target - tol,
                               [](const PathEntry& p, double v) { return p.d < v; });
    for (; it != e.end() && it->d <= target + tol; ++it) {
      const auto k = static_cast<std::size_t>(it - e.begin());
      if (k != i && k != j && role[k] != Role::kDirect) return true;
    }
    return false;
  }
};

// Coincidental matches within tol can push a third entry into a first-order
// set, or swallow a first-order arrival as a multi-direction partner. Re-split
// from scratch: take dx plus five later entries, in three pairs, so
// that every cross pair has a partner, preferring splits whose same-direction
// pairs have none. The pair holding dx stays x.
bool repair_first_order(Pass& pass, std::array<std::vector<std::size_t>, 3>& firsts,
                        std::size_t ix, double d0) {
  // y/z arrivals pair with dx; the x sibling pairs with at least four of them
  std::vector<std::size_t> cross, pool;
  for (std::size_t i = ix + 1; i < pass.role.size(); ++i)
    if (pass.pairs(i, ix, d0)) cross.push_back(i);
  for (std::size_t i = ix + 1; i < pass.role.size(); ++i) {
    if (std::binary_search(cross.begin(), cross.end(), i)) {
      pool.push_back(i);
      continue;
    }
    int support = 0;
    for (std::size_t j : cross) support += pass.pairs(i, j, d0) ? 1 : 0;
    if (support >= 4) pool.push_back(i);
  }
  if (pool.size() < 5 || pool.size() > 20) return false;

  const std::size_t n = pool.size() + 1;
  std::vector<std::size_t> all{ix};
  all.insert(all.end(), pool.begin(), pool.end());
  std::vector<std::vector<char>> edge(n, std::vector<char>(n, 0));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) edge[a][b] = edge[b][a] = pass.pairs(all[a], all[b], d0);

  int best_score = -1;
  bool ambiguous = false;
  std::array<std::array<std::size_t, 2>, 3> best{};
  std::vector<std::size_t> pick;
  // choose 5 of the pool to join dx, then every way to pair the six up
  auto try_subset = [&](const std::vector<std::size_t>& six) {
    static constexpr int kPairings[15][6] = {
        {0, 1, 2, 3, 4, 5}, {0, 1, 2, 4, 3, 5}, {0, 1, 2, 5, 3, 4}, {0, 2, 1, 3, 4, 5},
        {0, 2, 1, 4, 3, 5}, {0, 2, 1, 5, 3, 4}, {0, 3, 1, 2, 4, 5}, {0, 3, 1, 4, 2, 5},
        {0, 3, 1, 5, 2, 4}, {0, 4, 1, 2, 3, 5}, {0, 4, 1, 3, 2, 5}, {0, 4, 1, 5, 2, 3},
        {0, 5, 1, 2, 3, 4}, {0, 5, 1, 3, 2, 4}, {0, 5, 1, 4, 2, 3}};
    for (const auto& pr : kPairings) {
      std::array<std::array<std::size_t, 2>, 3> g{};
      for (int k = 0; k < 3; ++k) g[k] = {six[pr[2 * k]], six[pr[2 * k + 1]]};
      bool cross = true;
      for (int a = 0; a < 3 && cross; ++a)
        for (int b = a + 1; b < 3 && cross; ++b)
          for (std::size_t u : g[a])
            for (std::size_t v : g[b]) cross &= edge[u][v] != 0;
      if (!cross) continue;
      int score = 0;
      for (const auto& p : g) score += edge[p[0]][p[1]] ? 0 : 1;
      if (score > best_score) {
        best_score = score;
        best = g;
        ambiguous = false;
      } else if (score == best_score) {
        ambiguous = true;
      }
    }
  };
  std::vector<char> take(pool.size(), 0);
  std::fill(take.end() - 5, take.end(), 1);
  do {
    std::vector<std::size_t> six{0};
    for (std::size_t k = 0; k < pool.size(); ++k)
      if (take[k]) six.push_back(k + 1);
    try_subset(six);
  } while (std::next_permutation(take.begin(), take.end()));
  if (best_score < 0 || ambiguous) return false;

  for (std::size_t i = ix + 1; i < pass.role.size(); ++i) pass.role[i] = Role::kFree;
  // best[0] holds dx; the other two pairs become y and z by earliest arrival
  if (std::min(all[best[2][0]], all[best[2][1]]) < std::min(all[best[1][0]], all[best[1][1]]))
    std::swap(best[1], best[2]);
  for (std::size_t a = 0; a < 3; ++a) {
    firsts[a] = {all[best[a][0]], all[best[a][1]]};
    std::sort(firsts[a].begin(), firsts[a].end());
    for (std::size_t i : firsts[a]) pass.role[i] = first_role(a);
  }
  return true;
}

}  // namespace

std::optional<ClassifiedReflections> classify_with_hypothesis(const PathLengthSet& set,
                                                              std::size_t direct,
                                                              std::size_t first) {
  const auto& e = set.entries;
  if (direct >= first || first >= e.size()) return std::nullopt;

  Pass pass{e, set.tol, first + 1, std::vector<Role>(e.size(), Role::kFree)};
  for (std::size_t i = 0; i < first; ++i) pass.role[i] = Role::kLeftover;
  pass.role[direct] = Role::kDirect;
  pass.role[first] = Role::kFirstX;
  const double d0 = e[direct].d;
  const double dx = e[first].d;

  // Entries pairing with dx across directions are first-order y/z; the
  // matched partners are multi-direction second order.
  std::vector<std::size_t> found;
  for (std::size_t i = pass.begin; i < e.size(); ++i) {
    if (pass.role[i] != Role::kFree) continue;
    auto ks = pass.match(e[i].d, dx, d0, i);
    if (ks.empty()) continue;
    found.push_back(i);
    pass.mark(ks, Role::kMulti);
  }
  if (found.empty()) return std::nullopt;

  // Smallest found is dy. Entries that pair with dy are z, the rest y.
  const std::size_t iy = found.front();
  pass.role[iy] = Role::kFirstY;
  std::vector<std::size_t> rest;
  for (std::size_t f = 1; f < found.size(); ++f) {
    auto ks = pass.match(e[found[f]].d, e[iy].d, d0, found[f]);
    if (!ks.empty()) {
      pass.role[found[f]] = Role::kFirstZ;
      pass.mark(ks, Role::kMulti);
    } else {
      rest.push_back(found[f]);
    }
  }
  for (std::size_t f : rest) pass.role[f] = Role::kFirstY;

  // Re-scan with dy for the second x arrival.
  for (std::size_t i = pass.begin; i < e.size(); ++i) {
    if (pass.role[i] != Role::kFree) continue;
    auto ks = pass.match(e[i].d, e[iy].d, d0, i);
    if (ks.empty()) continue;
    pass.role[i] = Role::kFirstX;
    pass.mark(ks, Role::kMulti);
  }

  ClassifiedReflections out;
  out.c = set.c;
  out.tol = set.tol;
  out.hypothesis = {direct, first};
  out.d0 = e[direct];
  std::array<std::vector<std::size_t>, 3> firsts;
  for (std::size_t i = 0; i < e.size(); ++i) {
    for (std::size_t a = 0; a < 3; ++a)
      if (pass.role[i] == first_role(a)) firsts[a].push_back(i);
  }
  bool sized = true;
  for (const auto& f : firsts) sized &= f.size() == 2;
  if (!sized && !repair_first_order(pass, firsts, first, d0)) return std::nullopt;

  // Every cross-direction first-order pair explains one multi-direction
  // arrival; prune those the scans above did not reach.
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = a + 1; b < 3; ++b)
      for (std::size_t i : firsts[a])
        for (std::size_t j : firsts[b]) pass.mark(pass.match(e[i].d, e[j].d, d0, i), Role::kMulti);

  // A single-direction second-order arrival comes after both first-order
  // arrivals of its direction, so anything earlier than the earliest such
  // bound cannot belong to S2_single.
  double single_floor = e.back().d + 1.0;
  for (const auto& f : firsts) single_floor = std::min(single_floor, e[f[1]].d);

  for (std::size_t i = 0; i < e.size(); ++i) {
    switch (pass.role[i]) {
      case Role::kFirstX: out.first_order[0].push_back(e[i]); break;
      case Role::kFirstY: out.first_order[1].push_back(e[i]); break;
      case Role::kFirstZ: out.first_order[2].push_back(e[i]); break;
      case Role::kMulti: out.s2_multi.push_back(e[i]); break;
      case Role::kLeftover: out.leftovers.push_back(e[i]); break;
      case Role::kDirect: break;
      case Role::kFree:
        if (e[i].d > single_floor) {
          out.s2_single.push_back(e[i]);
        } else {
          out.leftovers.push_back(e[i]);
        }
        break;
    }
  }
  if (out.s2_multi.size() > 12) return std::nullopt;
  return out;
}

ClassifiedReflections classify_reflections(const PathLengthSet& set, const ClassifierOptions& options) {
  const std::size_t n = set.entries.size();
  const std::size_t leading = std::min(options.leading, n);
  for (std::size_t first = 1; first < leading; ++first) {
    for (std::size_t direct = 0; direct < first; ++direct) {
      if (auto cls = classify_with_hypothesis(set, direct, first)) return *std::move(cls);
    }
  }
  throw ClassificationFailure("no (direct, first-order) hypothesis among the first " +
                              std::to_string(leading) + " of " + std::to_string(n) +
                              " arrivals yields matching set cardinalities");
}

}  // namespace roomest
