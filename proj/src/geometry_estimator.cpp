#include "roomest/geometry_estimator.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <string>

namespace roomest {

std::optional<DirectionSolution> try_solve_direction(double d0, double da, double db,
                                                     double dc) noexcept {
  if (!(d0 > 0.0 && da > 0.0 && db > 0.0 && dc > 0.0)) return std::nullopt;
  const double d0sq = d0 * d0;
  const double A = da * da - d0sq;  // (x_s + x_r)^2 - (x_s - x_r)^2
  const double C = dc * dc - d0sq;  // 4L^2 - 4L(x_s - x_r)
  const double D = db * db - da * da;  // 4L^2 - 4L(x_s + x_r)
  const double den = 8.0 * (C - D) - 16.0 * A;
  if (!(std::abs(den) >= 1e-12)) return std::nullopt;
  const double L2 = (C * C - D * D) / den;
  if (!(L2 > 0.0) || !std::isfinite(L2)) return std::nullopt;

  DirectionSolution s;
  s.L = std::sqrt(L2);
  s.u = (4.0 * L2 - C) / (4.0 * s.L);
  s.v = (4.0 * L2 - D) / (4.0 * s.L);
  s.W = d0sq - s.u * s.u;
  if (s.W < 0.0) return std::nullopt;
  if (!(s.v > 0.0 && s.v < 2.0 * s.L && std::abs(s.u) < s.L)) return std::nullopt;
  const double xs = s.source();
  const double xr = s.receiver();
  if (!(xs > 0.0 && xs < s.L && xr > 0.0 && xr < s.L)) return std::nullopt;
  s.sibling_pred = std::sqrt(d0sq + 4.0 * L2 + 4.0 * s.L * s.u);
  return s;
}

DirectionSolution solve_direction(double d0, double da, double db, double dc) {
  if (auto s = try_solve_direction(d0, da, db, dc)) return *s;
  std::ostringstream msg;
  msg << "inconsistent hypothesis: (d0, da, db, dc) = (" << d0 << ", " << da << ", " << db << ", "
      << dc << ") has no wall-pair solution";
  throw InconsistentHypothesis(msg.str());
}

namespace {

std::string failure_message(Axis axis) {
  return "estimation failure: no verifiable single-direction second-order pair for direction " +
         std::string(axis_name(axis));
}

// Nearest entry to `target` among candidates[k] with usable[k], or npos.
std::size_t nearest(const std::vector<PathEntry>& candidates, const std::vector<char>& usable,
                    double target, std::size_t skip) {
  std::size_t best = std::string::npos;
  double best_err = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (!usable[k] || k == skip) continue;
    const double err = std::abs(candidates[k].d - target);
    if (err < best_err) {
      best_err = err;
      best = k;
    }
  }
  return best;
}

struct Hypothesis {
  std::size_t axis = 0;
  std::size_t second = 0;
  std::size_t sibling = 0;
  DirectionDiagnostics diag;
};

// Lower residual wins, then smaller L; anything within eps keeps search order.
bool better(const DirectionDiagnostics& a, const DirectionDiagnostics& b) {
  constexpr double eps = 1e-9;
  if (a.sibling_residual < b.sibling_residual - eps) return true;
  if (a.sibling_residual > b.sibling_residual + eps) return false;
  return a.solution.L < b.solution.L - eps;
}

// Every verified hypothesis for one axis over `candidates`, in search order:
// ascending dc, near-wall assignment first.
std::vector<Hypothesis> axis_hypotheses(std::size_t axis, double d0, const PathEntry& near,
                                        const PathEntry& far, const std::vector<PathEntry>& candidates,
                                        const std::vector<char>& usable, double tol) {
  std::vector<Hypothesis> out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!usable[i]) continue;
    for (int assignment = 0; assignment < 2; ++assignment) {
      const PathEntry& da = assignment == 0 ? near : far;
      const PathEntry& db = assignment == 0 ? far : near;
      auto sol = try_solve_direction(d0, da.d, db.d, candidates[i].d);
      if (!sol) continue;
      std::size_t j = nearest(candidates, usable, sol->sibling_pred, i);
      if (j == std::string::npos || std::abs(candidates[j].d - sol->sibling_pred) > tol) {
        // Coincident dc and sibling collapse into one entry.
        if (std::abs(candidates[i].d - sol->sibling_pred) > tol) continue;
        j = i;
      }
      Hypothesis h;
      h.axis = axis;
      h.second = i;
      h.sibling = j;
      h.diag.solution = *sol;
      h.diag.near = da;
      h.diag.far = db;
      h.diag.second = candidates[i];
      h.diag.sibling = candidates[j];
      h.diag.sibling_residual = std::abs(candidates[j].d - sol->sibling_pred);
      out.push_back(h);
    }
  }
  return out;
}

RoomConfig assemble(const std::array<DirectionDiagnostics, 3>& dirs, double c) {
  RoomConfig config;
  config.c = c;
  for (std::size_t a = 0; a < 3; ++a) {
    const DirectionSolution& s = dirs[a].solution;
    config.dims[a] = s.L;
    // A first-order arrival merged into the direct path puts a point on the
    // wall; keep it just inside so the result stays a valid room.
    const double eps = 1e-9 * s.L;
    config.source[a] = std::clamp(s.source(), eps, s.L - eps);
    config.receiver[a] = std::clamp(s.receiver(), eps, s.L - eps);
  }
  return config;
}

std::vector<double> order2_path_lengths(const RoomConfig& config) {
  std::vector<double> out;
  for (const Pulse& p : enumerate_pulses(config, 2)) out.push_back(p.path_length);
  return out;
}

constexpr double kStrongFraction = 0.02;
// An entry more than this many times stronger than the arrival it would
// stand for (floored at the strong-evidence level) is taken to be something else.
constexpr double kAmplitudeRatio = 4.0;

double amplitude_floor(const std::vector<PathEntry>& entries) {
  double top = 0.0;
  for (const PathEntry& e : entries) top = std::max(top, e.a);
  return kStrongFraction * top;
}

// Nearest entry within tol of an arrival at d with predicted amplitude amp,
// skipping implausibly strong ones; npos if none.
std::size_t account_for(const std::vector<PathEntry>& sorted, double d, double amp, double tol,
                        double floor) {
  auto lo = std::lower_bound(sorted.begin(), sorted.end(), d - tol,
                             [](const PathEntry& e, double v) { return e.d < v; });
  std::size_t best = std::string::npos;
  double dist = std::numeric_limits<double>::infinity();
  for (auto it = lo; it != sorted.end() && it->d <= d + tol; ++it) {
    if (it->a > kAmplitudeRatio * std::max(amp, floor)) continue;
    if (std::abs(it->d - d) < dist) {
      dist = std::abs(it->d - d);
      best = static_cast<std::size_t>(it - sorted.begin());
    }
  }
  return best;
}

double nearest_distance(const std::vector<PathEntry>& sorted, double d) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), d,
                             [](const PathEntry& e, double v) { return e.d < v; });
  double best = std::numeric_limits<double>::infinity();
  if (it != sorted.end()) best = std::min(best, std::abs(it->d - d));
  if (it != sorted.begin()) best = std::min(best, std::abs(std::prev(it)->d - d));
  return best;
}

}  // namespace

EstimationFailure::EstimationFailure(Axis axis,
                                     std::array<std::optional<DirectionDiagnostics>, 3> partial)
    : Error(failure_message(axis)), axis_(axis), partial_(partial) {}

int EstimationFailure::solved_count() const {
  int n = 0;
  for (const auto& p : partial_) n += p.has_value() ? 1 : 0;
  return n;
}

EstimatedConfig estimate_configuration(const ClassifiedReflections& cls, double tol) {
  for (std::size_t a = 0; a < 3; ++a) {
    if (cls.first_order[a].size() != 2) {
      throw InvalidArgument("first-order set " + std::string(axis_name(kAxes[a])) +
                            " must hold exactly two arrivals");
    }
  }
  const std::vector<PathEntry>& candidates = cls.s2_single;
  std::vector<char> usable(candidates.size(), 1);
  std::array<std::optional<DirectionDiagnostics>, 3> solved;
  const double d0 = cls.d0.d;

  for (int round = 0; round < 3; ++round) {
    std::optional<Hypothesis> best;
    for (std::size_t a = 0; a < 3; ++a) {
      if (solved[a]) continue;
      const auto& pair = cls.first_order[a];
      const PathEntry& near = pair[0].d <= pair[1].d ? pair[0] : pair[1];
      const PathEntry& far = pair[0].d <= pair[1].d ? pair[1] : pair[0];
      for (const Hypothesis& h : axis_hypotheses(a, d0, near, far, candidates, usable, tol)) {
        if (!best || better(h.diag, best->diag)) best = h;
      }
    }
    if (!best) {
      for (std::size_t a = 0; a < 3; ++a)
        if (!solved[a]) throw EstimationFailure(kAxes[a], solved);
    }
    solved[best->axis] = best->diag;
    usable[best->second] = 0;
    usable[best->sibling] = 0;
  }

  EstimatedConfig est;
  for (std::size_t a = 0; a < 3; ++a) est.directions[a] = *solved[a];
  est.config = assemble(est.directions, cls.c);
  for (std::size_t k = 0; k < candidates.size(); ++k)
    if (usable[k]) est.erroneous.push_back(candidates[k]);
  est.erroneous.insert(est.erroneous.end(), cls.leftovers.begin(), cls.leftovers.end());
  std::sort(est.erroneous.begin(), est.erroneous.end(),
            [](const PathEntry& x, const PathEntry& y) { return x.d < y.d; });
  return est;
}

CoefficientEstimate estimate_reflection_coefficients(const EstimatedConfig& est, double epsilon) {
  CoefficientEstimate out;
  for (std::size_t a = 0; a < 3; ++a) {
    const DirectionDiagnostics& dir = est.directions[a];
    const double near = 4.0 * kPi * dir.near.d * dir.near.a;
    const double far = 4.0 * kPi * dir.far.d * dir.far.a;
    out.betas[2 * a] = near;
    out.betas[2 * a + 1] = far;
    out.second_order_residuals[2 * a] = near * far / (4.0 * kPi * dir.second.d) - dir.second.a;
    out.second_order_residuals[2 * a + 1] = near * far / (4.0 * kPi * dir.sibling.d) - dir.sibling.a;
  }
  for (double b : out.betas) {
    if (!(b >= 0.0 && b <= 1.0 + epsilon)) out.valid = false;
  }
  return out;
}

void refine_overlapped_coefficients(const RoomConfig& geometry, const PathLengthSet& set,
                                    CoefficientEstimate& coefficients, double epsilon) {
  auto bad = [&](double b) { return !(b >= 0.0 && b <= 1.0 + epsilon); };
  std::array<bool, 6> todo{};
  bool any = false;
  for (std::size_t w = 0; w < 6; ++w) any |= todo[w] = bad(coefficients.betas[w]);
  if (!any) return;

  RoomConfig unit = geometry;
  unit.betas.fill(1.0);
  const PulseList pulses = enumerate_pulses(unit, 2);
  std::vector<std::array<int, 6>> hits(pulses.size());
  std::array<std::size_t, 6> first{};
  first.fill(pulses.size());
  for (std::size_t i = 0; i < pulses.size(); ++i) {
    for (std::size_t ax = 0; ax < 3; ++ax) {
      hits[i][2 * ax] = std::abs(pulses[i].index.m[ax] - pulses[i].index.p[ax]);
      hits[i][2 * ax + 1] = std::abs(pulses[i].index.m[ax]);
    }
    if (pulses[i].order == 1)
      for (std::size_t w = 0; w < 6; ++w)
        if (hits[i][w]) first[w] = i;
  }

  // Walls still unknown keep a neutral guess while the others are peeled off.
  std::array<double, 6> beta{};
  for (std::size_t w = 0; w < 6; ++w) beta[w] = todo[w] ? 0.0 : std::clamp(coefficients.betas[w], 0.0, 1.0);

  for (std::size_t w = 0; w < 6; ++w) {
    if (!todo[w] || first[w] == pulses.size()) continue;
    const Pulse& own = pulses[first[w]];
    const double total = std::clamp(coefficients.betas[w], 0.0, std::numeric_limits<double>::max());
    // total = 4 pi d * measured amplitude = sum over overlapping arrivals of gain * d / d_other
    double rest = total;
    int sharing = 1;
    for (std::size_t i = 0; i < pulses.size(); ++i) {
      if (i == first[w] || std::abs(pulses[i].path_length - own.path_length) > set.tol) continue;
      bool unknown = false;
      double gain = 1.0;
      for (std::size_t j = 0; j < 6; ++j) {
        if (!hits[i][j]) continue;
        if (todo[j]) unknown = true;
        gain *= std::pow(beta[j], hits[i][j]);
      }
      if (unknown && pulses[i].order == 1) {
        ++sharing;
        continue;
      }
      if (!unknown) rest -= gain * own.path_length / pulses[i].path_length;
    }
    coefficients.betas[w] = std::max(rest, 0.0) / sharing;
    coefficients.refined[w] = true;
  }
  coefficients.valid = true;
  for (double b : coefficients.betas)
    if (bad(b)) coefficients.valid = false;
}

namespace {

// Parameters per axis: L, source, receiver.
using GeometryParams = Eigen::Matrix<double, 9, 1>;

GeometryParams to_params(const RoomConfig& c) {
  GeometryParams x;
  for (int a = 0; a < 3; ++a) {
    x(3 * a) = c.dims[a];
    x(3 * a + 1) = c.source[a];
    x(3 * a + 2) = c.receiver[a];
  }
  return x;
}

struct Match {
  double ss = 0.0;
  std::size_t count = 0;
  std::vector<double> target;  // NaN when unmatched
};

double arrival_length(const GeometryParams& x, const ImageIndex& idx) {
  double sq = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double comp = 2.0 * idx.m[a] * x(3 * a) + (1 - 2 * idx.p[a]) * x(3 * a + 1) - x(3 * a + 2);
    sq += comp * comp;
  }
  return std::sqrt(sq);
}

GeometryParams arrival_gradient(const GeometryParams& x, const ImageIndex& idx) {
  const double d = arrival_length(x, idx);
  GeometryParams g;
  for (int a = 0; a < 3; ++a) {
    const double comp = 2.0 * idx.m[a] * x(3 * a) + (1 - 2 * idx.p[a]) * x(3 * a + 1) - x(3 * a + 2);
    const double k = d > 0.0 ? comp / d : 0.0;
    g(3 * a) = k * 2.0 * idx.m[a];
    g(3 * a + 1) = k * (1 - 2 * idx.p[a]);
    g(3 * a + 2) = -k;
  }
  return g;
}

// Target entry per arrival, NaN when unmatched.
using Targets = std::vector<double>;

double sum_squares(const GeometryParams& x, const PulseList& arrivals, const Targets& targets) {
  double ss = 0.0;
  for (std::size_t i = 0; i < arrivals.size(); ++i) {
    if (std::isnan(targets[i])) continue;
    const double r = targets[i] - arrival_length(x, arrivals[i].index);
    ss += r * r;
  }
  return ss;
}

// Levenberg-Marquardt on fixed targets.
GeometryParams fit_targets(GeometryParams x, const PulseList& arrivals, const Targets& targets) {
  double lambda = 1e-3;
  double ss = sum_squares(x, arrivals, targets);
  for (int it = 0; it < 30; ++it) {
    Eigen::Matrix<double, 9, 9> jtj = Eigen::Matrix<double, 9, 9>::Zero();
    GeometryParams jtr = GeometryParams::Zero();
    for (std::size_t i = 0; i < arrivals.size(); ++i) {
      if (std::isnan(targets[i])) continue;
      const GeometryParams g = arrival_gradient(x, arrivals[i].index);
      jtj += g * g.transpose();
      jtr += g * (targets[i] - arrival_length(x, arrivals[i].index));
    }
    Eigen::Matrix<double, 9, 9> damped = jtj;
    damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
    const GeometryParams step = damped.ldlt().solve(jtr);
    if (!step.allFinite()) break;
    const GeometryParams trial = x + step;
    const double trial_ss = sum_squares(trial, arrivals, targets);
    if (trial_ss < ss) {
      const bool settled = ss - trial_ss <= 1e-14 * (1.0 + ss);
      x = trial;
      ss = trial_ss;
      lambda = std::max(lambda * 0.3, 1e-9);
      if (settled) break;
    } else {
      lambda *= 10.0;
      if (lambda > 1e6) break;
    }
  }
  return x;
}

// Re-matches every arrival. A matched arrival is judged by where the fit
// would put it without its own target (r / (1 - h) from the hat matrix), so
// a wrong entry cannot hold the prediction in place.
Targets rematch(const GeometryParams& x, const PulseList& arrivals, const Targets& targets,
                const PathLengthSet& set, double tol) {
  const double floor = amplitude_floor(set.entries);
  Eigen::Matrix<double, 9, 9> jtj = Eigen::Matrix<double, 9, 9>::Zero();
  for (std::size_t i = 0; i < arrivals.size(); ++i)
    if (!std::isnan(targets[i])) {
      const GeometryParams g = arrival_gradient(x, arrivals[i].index);
      jtj += g * g.transpose();
    }
  const Eigen::LDLT<Eigen::Matrix<double, 9, 9>> solver(jtj);
  Targets out(arrivals.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < arrivals.size(); ++i) {
    double d = arrival_length(x, arrivals[i].index);
    if (!std::isnan(targets[i])) {
      const GeometryParams g = arrival_gradient(x, arrivals[i].index);
      const double h = g.dot(solver.solve(g));
      if (std::isfinite(h) && h < 0.9) d = targets[i] - (targets[i] - d) / (1.0 - h);
    }
    const std::size_t k = account_for(set.entries, d, arrivals[i].amplitude, tol, floor);
    if (k != std::string::npos) out[i] = set.entries[k].d;
  }
  return out;
}

std::size_t matched_count(const Targets& t) {
  return static_cast<std::size_t>(std::count_if(t.begin(), t.end(), [](double v) { return !std::isnan(v); }));
}

bool same_targets(const Targets& a, const Targets& b) {
  return std::equal(a.begin(), a.end(), b.begin(),
                    [](double u, double v) { return (std::isnan(u) && std::isnan(v)) || u == v; });
}

Match match_arrivals(const GeometryParams& x, const PulseList& arrivals, const PathLengthSet& set,
                     double tol) {
  const double floor = amplitude_floor(set.entries);
  Match m;
  m.target.assign(arrivals.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < arrivals.size(); ++i) {
    const double d = arrival_length(x, arrivals[i].index);
    const std::size_t k = account_for(set.entries, d, arrivals[i].amplitude, tol, floor);
    if (k == std::string::npos) continue;
    m.target[i] = set.entries[k].d;
    m.ss += (set.entries[k].d - d) * (set.entries[k].d - d);
    ++m.count;
  }
  return m;
}

}  // namespace

RoomConfig refine_geometry(const RoomConfig& start, const PathLengthSet& set, double tol) {
  const PulseList arrivals = enumerate_pulses(start, 2);
  GeometryParams x = to_params(start);
  const Match initial = match_arrivals(x, arrivals, set, tol);
  if (initial.count < 9 || initial.ss == 0.0) return start;

  Targets targets = initial.target;
  for (int round = 0; round < 6; ++round) {
    x = fit_targets(x, arrivals, targets);
    Targets next = rematch(x, arrivals, targets, set, tol);
    if (matched_count(next) < 9) return start;
    if (same_targets(next, targets)) break;
    targets = std::move(next);
  }
  x = fit_targets(x, arrivals, targets);

  for (int a = 0; a < 3; ++a) {
    const double L = x(3 * a);
    if (!(L > 0.0) || !(x(3 * a + 1) > 0.0 && x(3 * a + 1) < L) || !(x(3 * a + 2) > 0.0 && x(3 * a + 2) < L))
      return start;
  }
  const Match final = match_arrivals(x, arrivals, set, tol);
  if (final.count < initial.count) return start;

  RoomConfig out = start;
  for (int a = 0; a < 3; ++a) {
    out.dims[a] = x(3 * a);
    out.source[a] = x(3 * a + 1);
    out.receiver[a] = x(3 * a + 2);
  }
  return out;
}

double closure_residual(const RoomConfig& config, const PathLengthSet& set) {
  double worst = 0.0;
  for (double d : order2_path_lengths(config)) worst = std::max(worst, nearest_distance(set.entries, d));
  return worst;
}

std::vector<PathEntry> unexplained_entries(const RoomConfig& config, const PathLengthSet& set,
                                           double tol) {
  // Each predicted arrival accounts for one entry; several arrivals may
  // share one entry after merging.
  const double floor = amplitude_floor(set.entries);
  std::vector<char> explained(set.entries.size(), 0);
  for (const Pulse& p : enumerate_pulses(config, 2)) {
    const std::size_t k = account_for(set.entries, p.path_length, p.amplitude, tol, floor);
    if (k != std::string::npos) explained[k] = 1;
  }
  std::vector<PathEntry> out;
  for (std::size_t k = 0; k < set.entries.size(); ++k)
    if (!explained[k]) out.push_back(set.entries[k]);
  return out;
}

namespace {

// One wall pair with its first-order arrivals fixed. Given t = u^2 the pair
// is fully determined: v^2 = A + t, (2L - v)^2 = B + t.
struct AxisPair {
  PathEntry near;
  PathEntry far;
  double A = 0.0;
  double B = 0.0;
};

struct AxisState {
  DirectionSolution solution;
  double minus = 0.0;  // sqrt((2L - u)^2 + W)
  double plus = 0.0;   // sqrt((2L + u)^2 + W), the sibling
};

AxisState axis_from_t(const AxisPair& p, double d0sq, double t) {
  t = std::max(t, 0.0);
  AxisState s;
  DirectionSolution& sol = s.solution;
  sol.u = std::sqrt(t);
  sol.v = std::sqrt(std::max(p.A + t, 0.0));
  sol.L = 0.5 * (sol.v + std::sqrt(std::max(p.B + t, 0.0)));
  sol.W = d0sq - t;
  s.minus = std::sqrt(std::max((2.0 * sol.L - sol.u) * (2.0 * sol.L - sol.u) + sol.W, 0.0));
  s.plus = std::sqrt(std::max((2.0 * sol.L + sol.u) * (2.0 * sol.L + sol.u) + sol.W, 0.0));
  sol.sibling_pred = s.plus;
  return s;
}

// Values of t in [0, d0^2] that put one of the pair's single-direction
// second-order arrivals exactly on an observed entry.
std::vector<double> axis_t_candidates(const AxisPair& p, double d0sq,
                                      const std::vector<PathEntry>& entries) {
  constexpr int kGrid = 128;
  std::array<double, kGrid + 1> ts{};
  std::array<std::array<double, kGrid + 1>, 2> curve{};
  for (int k = 0; k <= kGrid; ++k) {
    ts[k] = d0sq * k / kGrid;
    const AxisState s = axis_from_t(p, d0sq, ts[k]);
    curve[0][k] = s.minus;
    curve[1][k] = s.plus;
  }
  std::vector<double> out;
  for (const PathEntry& e : entries) {
    for (int branch = 0; branch < 2; ++branch) {
      for (int k = 0; k < kGrid; ++k) {
        const double f0 = curve[branch][k] - e.d;
        const double f1 = curve[branch][k + 1] - e.d;
        if (f0 * f1 > 0.0) continue;
        double lo = ts[k], hi = ts[k + 1], flo = f0;
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (lo + hi);
          const AxisState s = axis_from_t(p, d0sq, mid);
          const double fm = (branch == 0 ? s.minus : s.plus) - e.d;
          if ((fm <= 0.0) == (flo <= 0.0)) {
            lo = mid;
            flo = fm;
          } else {
            hi = mid;
          }
        }
        out.push_back(0.5 * (lo + hi));
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(),
                        [&](double x, double y) { return std::abs(x - y) <= 1e-9 * (1.0 + d0sq); }),
            out.end());
  return out;
}

// Strong evidence counts fully; entries at the level of sidelobe interference
// (a fraction of a percent of the strongest arrival) count partly:
// weight = min(1, amplitude / (kStrongFraction * strongest)).
// Credit for an explained entry is capped at the weight of this multiple of
// its predicted amplitude.
constexpr double kCreditSlack = 2.0;

struct Evidence {
  const std::vector<PathEntry>& entries;
  double floor = 0.0;  // weakest entry, a stand-in for the detection threshold
  double strong = 0.0;
  std::vector<double> weight;

  explicit Evidence(const std::vector<PathEntry>& e) : entries(e) {
    floor = std::numeric_limits<double>::infinity();
    for (const PathEntry& x : e) {
      floor = std::min(floor, x.a);
      strong = std::max(strong, x.a);
    }
    strong *= kStrongFraction;
    for (const PathEntry& x : e) weight.push_back(of(x.a));
  }
  double of(double amplitude) const { return strong > 0.0 ? std::min(1.0, amplitude / strong) : 1.0; }
  // Arrivals predicted weaker than this may be absent from the data.
  double visible() const { return 2.0 * floor; }
};

// Lower cost wins: weight of unexplained entries plus weight of predicted
// arrivals with no entry. Squared residual breaks ties.
struct Score {
  double cost = std::numeric_limits<double>::infinity();
  double ss = std::numeric_limits<double>::infinity();

  bool worse_than(const Score& o) const {
    constexpr double eps = 1e-9;
    if (cost > o.cost + eps) return true;
    if (cost < o.cost - eps) return false;
    return ss > o.ss;
  }
};

struct SearchResult {
  EstimatedConfig est;
  Score score;
};

// The few best distinct results; near-ties are settled after polishing.
class Shortlist {
 public:
  explicit Shortlist(std::size_t capacity) : capacity_(capacity) {}

  bool empty() const { return items_.empty(); }
  const std::vector<SearchResult>& items() const { return items_; }
  double best_cost() const { return items_.empty() ? kInf : items_.front().score.cost; }
  // Anything costing more than this cannot enter.
  double cutoff() const { return items_.size() < capacity_ ? kInf : items_.back().score.cost; }
  bool admits(const Score& s) const { return items_.size() < capacity_ || items_.back().score.worse_than(s); }

  void insert(SearchResult r) {
    const std::vector<double> key = order2_path_lengths(r.est.config);
    for (std::size_t i = 0; i < items_.size(); ++i) {
      if (!same_arrivals(keys_[i], key)) continue;
      if (!items_[i].score.worse_than(r.score)) return;
      items_.erase(items_.begin() + static_cast<std::ptrdiff_t>(i));
      keys_.erase(keys_.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
    std::size_t pos = 0;
    while (pos < items_.size() && !items_[pos].score.worse_than(r.score)) ++pos;
    items_.insert(items_.begin() + static_cast<std::ptrdiff_t>(pos), std::move(r));
    keys_.insert(keys_.begin() + static_cast<std::ptrdiff_t>(pos), key);
    if (items_.size() > capacity_) {
      items_.pop_back();
      keys_.pop_back();
    }
  }

 private:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  static bool same_arrivals(std::vector<double> a, std::vector<double> b) {
    if (a.size() != b.size()) return false;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    for (std::size_t i = 0; i < a.size(); ++i)
      if (std::abs(a[i] - b[i]) > 1e-6) return false;
    return true;
  }

  std::size_t capacity_;
  std::vector<SearchResult> items_;
  std::vector<std::vector<double>> keys_;
};

std::size_t nearest_index(const std::vector<PathEntry>& sorted, double d) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), d,
                             [](const PathEntry& e, double v) { return e.d < v; });
  if (it == sorted.end()) return sorted.size() - 1;
  const auto k = static_cast<std::size_t>(it - sorted.begin());
  if (k > 0 && d - sorted[k - 1].d < sorted[k].d - d) return k - 1;
  return k;
}

double beta_of(const PathEntry& first) { return std::clamp(4.0 * kPi * first.d * first.a, 0.0, 1.0); }

// A first-order assignment with the t-independent part of its score: direct
// path, first-order and cross-direction arrivals.
struct FirstOrderCandidate {
  std::size_t direct = 0;
  std::array<std::array<std::size_t, 2>, 3> firsts{};
  std::vector<char> fixed;
  double fixed_cost = 0.0;  // unexplained weight if no single-direction arrival matched
  double fixed_ss = 0.0;
  double bound = 0.0;       // fixed_cost minus the six heaviest free entries
};

std::optional<FirstOrderCandidate> prepare_candidate(const Evidence& ev, std::size_t direct,
                                                     const std::array<std::array<std::size_t, 2>, 3>& firsts,
                                                     double match_tol) {
  const auto& e = ev.entries;
  const double d0sq = e[direct].d * e[direct].d;
  FirstOrderCandidate c;
  c.direct = direct;
  c.firsts = firsts;
  c.fixed.assign(e.size(), 0);
  c.fixed[direct] = 1;
  for (const auto& f : firsts) {
    if (e[f[1]].d <= e[direct].d) return std::nullopt;
    c.fixed[f[0]] = c.fixed[f[1]] = 1;
  }
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = a + 1; b < 3; ++b)
      for (std::size_t i : firsts[a])
        for (std::size_t j : firsts[b]) {
          const double d = std::sqrt(std::max(e[i].d * e[i].d + e[j].d * e[j].d - d0sq, 0.0));
          const std::size_t k = nearest_index(e, d);
          const double r = std::abs(e[k].d - d);
          if (r > match_tol) {
            const double amp = beta_of(e[i]) * beta_of(e[j]) / (4.0 * kPi * d);
            if (amp > ev.visible()) return std::nullopt;
            c.fixed_cost += ev.of(amp);
            continue;
          }
          c.fixed[k] = 1;
          c.fixed_ss += r * r;
        }
  std::vector<double> free_weights;
  for (std::size_t k = 0; k < e.size(); ++k) {
    if (c.fixed[k]) continue;
    c.fixed_cost += ev.weight[k];
    free_weights.push_back(ev.weight[k]);
  }
  std::sort(free_weights.rbegin(), free_weights.rend());
  c.bound = c.fixed_cost;
  for (std::size_t k = 0; k < std::min<std::size_t>(6, free_weights.size()); ++k) c.bound -= free_weights[k];
  return c;
}

// One axis at a fixed t: its two single-direction arrivals against the data.
struct AxisEval {
  double t = 0.0;
  AxisState state;
  std::array<std::size_t, 2> matched{std::string::npos, std::string::npos};
  std::array<double, 2> credit{};
  double gain = 0.0;  // weight of newly explained entries minus weight of missing ones
  double ss = 0.0;
  std::size_t variant = 0;
};

// Scores every (t_x, t_y, t_z) with t_x + t_y + t_z = d0^2 where at least two
// axes put a single-direction arrival on an observed entry.
void search_candidate(const Evidence& ev, double c_sound, const FirstOrderCandidate& cand,
                      double match_tol, Shortlist& best) {
  const auto& e = ev.entries;
  const double d0 = e[cand.direct].d;
  const double d0sq = d0 * d0;

  // A first-order arrival hidden in the direct path is only known to lie
  // within match_tol behind it; try a few distances across that window.
  constexpr int kHiddenSteps = 6;
  std::array<std::vector<AxisPair>, 3> pairs;
  std::array<double, 3> amp_num{};
  for (std::size_t a = 0; a < 3; ++a) {
    const bool hidden = cand.firsts[a][0] == cand.direct;
    for (int k = 0; k <= (hidden ? kHiddenSteps : 0); ++k) {
      AxisPair p;
      p.near = e[cand.firsts[a][0]];
      p.near.d += match_tol * k / kHiddenSteps;
      p.far = e[cand.firsts[a][1]];
      p.A = p.near.d * p.near.d - d0sq;
      p.B = p.far.d * p.far.d - d0sq;
      pairs[a].push_back(p);
    }
    amp_num[a] = beta_of(pairs[a][0].near) * beta_of(pairs[a][0].far) / (4.0 * kPi);
  }

  auto eval_axis = [&](std::size_t a, std::size_t v, double t) {
    AxisEval out;
    out.t = t;
    out.variant = v;
    out.state = axis_from_t(pairs[a][v], d0sq, t);
    const std::array<double, 2> ds{out.state.minus, out.state.plus};
    for (std::size_t b = 0; b < 2; ++b) {
      const std::size_t k = nearest_index(e, ds[b]);
      const double r = std::abs(e[k].d - ds[b]);
      const double amp = amp_num[a] / ds[b];
      if (r <= match_tol) {
        out.ss += r * r;
        if (!cand.fixed[k] && (b == 0 || out.matched[0] != k)) {
          // A much stronger entry than predicted is likely something else.
          out.matched[b] = k;
          out.credit[b] = std::min(ev.weight[k], ev.of(kCreditSlack * amp));
          out.gain += out.credit[b];
        }
      } else if (amp > ev.visible()) {
        out.gain -= ev.of(amp);
      }
    }
    return out;
  };

  // Only entries outside the fixed part can pin t.
  std::vector<PathEntry> free_entries;
  std::vector<double> free_weights;
  for (std::size_t k = 0; k < e.size(); ++k) {
    if (cand.fixed[k]) continue;
    free_entries.push_back(e[k]);
    free_weights.push_back(ev.weight[k]);
  }
  std::sort(free_weights.rbegin(), free_weights.rend());
  double top_two = 0.0;
  for (std::size_t k = 0; k < std::min<std::size_t>(2, free_weights.size()); ++k) top_two += free_weights[k];

  std::array<std::vector<AxisEval>, 3> evals;
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t v = 0; v < pairs[a].size(); ++v)
      for (double t : axis_t_candidates(pairs[a][v], d0sq, free_entries)) evals[a].push_back(eval_axis(a, v, t));
    std::stable_sort(evals[a].begin(), evals[a].end(),
                     [](const AxisEval& x, const AxisEval& y) { return x.gain > y.gain; });
  }

  auto consider = [&](const std::array<const AxisEval*, 3>& axes) {
    Score score;
    score.cost = cand.fixed_cost;
    score.ss = cand.fixed_ss;
    std::array<std::size_t, 6> seen{};
    std::size_t n_seen = 0;
    for (const AxisEval* ax : axes) {
      score.ss += ax->ss;
      score.cost -= ax->gain;
      for (std::size_t b = 0; b < 2; ++b) {
        const std::size_t k = ax->matched[b];
        if (k == std::string::npos) continue;
        if (std::find(seen.begin(), seen.begin() + n_seen, k) != seen.begin() + n_seen) {
          score.cost += ax->credit[b];  // counted twice in the gains
          continue;
        }
        seen[n_seen++] = k;
      }
    }
    if (!best.admits(score)) return;
    SearchResult r;
    r.score = score;
    for (std::size_t a = 0; a < 3; ++a) {
      const AxisState& st = axes[a]->state;
      DirectionDiagnostics& dir = r.est.directions[a];
      dir.solution = st.solution;
      dir.near = pairs[a][axes[a]->variant].near;
      dir.far = pairs[a][axes[a]->variant].far;
      dir.second = e[nearest_index(e, st.minus)];
      dir.sibling = e[nearest_index(e, st.plus)];
      dir.sibling_residual = std::abs(dir.sibling.d - st.plus);
    }
    r.est.config = assemble(r.est.directions, c_sound);
    best.insert(std::move(r));
  };

  auto hopeless = [&](double lower_bound) { return lower_bound > best.cutoff() + 1e-9; };

  const double slack = 4.0 * d0 * match_tol;
  constexpr std::array<std::array<std::size_t, 3>, 3> kPairs{{{0, 1, 2}, {0, 2, 1}, {1, 2, 0}}};
  for (const auto& [a, b, c] : kPairs) {
    if (evals[a].empty() || evals[b].empty()) continue;
    const double top_b = evals[b].front().gain;
    for (const AxisEval& ea : evals[a]) {
      if (hopeless(cand.fixed_cost - ea.gain - top_b - top_two)) break;
      for (const AxisEval& eb : evals[b]) {
        if (hopeless(cand.fixed_cost - ea.gain - eb.gain - top_two)) break;
        const double tc = d0sq - ea.t - eb.t;
        if (tc < -slack) continue;
        AxisEval ec = eval_axis(c, 0, std::max(tc, 0.0));
        for (std::size_t v = 1; v < pairs[c].size(); ++v) {
          AxisEval alt = eval_axis(c, v, std::max(tc, 0.0));
          if (alt.gain > ec.gain || (alt.gain == ec.gain && alt.ss < ec.ss)) ec = alt;
        }
        std::array<const AxisEval*, 3> axes{};
        axes[a] = &ea;
        axes[b] = &eb;
        axes[c] = &ec;
        consider(axes);
      }
    }
  }
}

// Which merge and detection effects a first-order assignment may assume.
struct Relaxation {
  bool direct_merge = false;  // earliest first-order arrival hidden in the direct path
  bool shared = false;        // two first-order arrivals merged into one entry
  int max_weak = 0;           // cross arrivals allowed absent for being too weak
};

using CandidateKey = std::array<std::size_t, 7>;

// Enumerates first-order assignments: three pairs whose cross-direction
// arrivals are present, up to the given relaxation. Keys already in `seen`
// are skipped.
std::vector<FirstOrderCandidate> enumerate_candidates(const Evidence& ev, std::size_t leading,
                                                      double match_tol, const Relaxation& relax,
                                                      std::set<CandidateKey>& seen,
                                                      std::size_t& budget) {
  const auto& e = ev.entries;
  const std::size_t n = e.size();
  std::vector<FirstOrderCandidate> out;
  const std::size_t step = relax.shared ? 0 : 1;

  const std::size_t max_direct = std::min<std::size_t>(3, n);
  for (std::size_t direct = 0; direct < max_direct && budget > 0; ++direct) {
    const double d0 = e[direct].d;
    // adj[i][j] = 2 when some entry sits at sqrt(d_i^2 + d_j^2 - d0^2), i.e. i
    // and j can be first-order arrivals of different directions; 1 when that
    // arrival would be too weak to see anyway.
    std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
    for (std::size_t i = direct; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        const double radicand = e[i].d * e[i].d + e[j].d * e[j].d - d0 * d0;
        if (radicand < 0.0) continue;
        const double target = std::sqrt(radicand);
        char v = 0;
        if (std::abs(e[nearest_index(e, target)].d - target) <= match_tol)
          v = 2;
        else if (relax.max_weak > 0 && beta_of(e[i]) * beta_of(e[j]) / (4.0 * kPi * target) <= ev.visible())
          v = 1;
        adj[i][j] = adj[j][i] = v;
      }
    }
    auto weak = [&](std::size_t i, std::size_t j) { return adj[i][j] == 1 ? 1 : 0; };

    const std::size_t first_lo = relax.direct_merge ? direct : direct + 1;
    const std::size_t first_hi = relax.direct_merge ? direct + 1 : std::min(n, direct + 1 + leading);
    for (std::size_t x1 = first_lo; x1 < first_hi && budget > 0; ++x1) {
      for (std::size_t y1 = std::max(x1 + step, direct + 1); y1 < n && budget > 0; ++y1) {
        if (!adj[x1][y1]) continue;
        const int w_y1 = weak(x1, y1);
        for (std::size_t z1 = y1 + step; z1 < n && budget > 0; ++z1) {
          if (!adj[x1][z1] || !adj[y1][z1]) continue;
          const int w_z1 = w_y1 + weak(x1, z1) + weak(y1, z1);
          if (w_z1 > relax.max_weak) continue;
          for (std::size_t x2 = std::max(x1 + step, direct + 1); x2 < n && budget > 0; ++x2) {
            if (!adj[x2][y1] || !adj[x2][z1]) continue;
            if (!relax.shared && (x2 == y1 || x2 == z1)) continue;
            const int w_x2 = w_z1 + weak(x2, y1) + weak(x2, z1);
            if (w_x2 > relax.max_weak) continue;
            for (std::size_t y2 = std::max(y1 + step, direct + 1); y2 < n && budget > 0; ++y2) {
              if (!adj[y2][x1] || !adj[y2][x2] || !adj[y2][z1]) continue;
              if (!relax.shared && (y2 == z1 || y2 == x2)) continue;
              const int w_y2 = w_x2 + weak(y2, x1) + weak(y2, x2) + weak(y2, z1);
              if (w_y2 > relax.max_weak) continue;
              for (std::size_t z2 = std::max(z1 + step, direct + 1); z2 < n && budget > 0; ++z2) {
                if (!adj[z2][x1] || !adj[z2][x2] || !adj[z2][y1] || !adj[z2][y2]) continue;
                if (!relax.shared && (z2 == x2 || z2 == y2)) continue;
                const int w = w_y2 + weak(z2, x1) + weak(z2, x2) + weak(z2, y1) + weak(z2, y2);
                if (w > relax.max_weak) continue;
                if (!seen.insert({direct, x1, x2, y1, y2, z1, z2}).second) continue;
                const std::array<std::array<std::size_t, 2>, 3> firsts{
                    {{x1, x2}, {y1, y2}, {z1, z2}}};
                auto c = prepare_candidate(ev, direct, firsts, match_tol);
                if (!c) continue;
                --budget;
                out.push_back(std::move(*c));
              }
            }
          }
        }
      }
    }
  }
  return out;
}

constexpr std::size_t kShortlist = 8;
// Results costing more than this above the best are not reconsidered.
constexpr double kShortlistMargin = 1.5;

void search_candidates(const Evidence& ev, double c_sound, std::vector<FirstOrderCandidate> candidates,
                       double match_tol, Shortlist& best) {
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const FirstOrderCandidate& a, const FirstOrderCandidate& b) {
                     return a.bound < b.bound;
                   });
  for (const FirstOrderCandidate& c : candidates) {
    if (c.bound > best.cutoff() + 1e-9) break;
    search_candidate(ev, c_sound, c, match_tol, best);
  }
}

std::optional<EstimatedConfig> search_first_order(const PathLengthSet& set,
                                                  const EstimatorOptions& options,
                                                  double match_tol) {
  if (set.entries.size() < 4) return std::nullopt;
  const Evidence ev(set.entries);
  std::size_t budget = options.fallback_candidate_limit;
  Shortlist best(kShortlist);
  std::set<CandidateKey> seen;
  // Cheapest explanation first; each later pass admits one more effect.
  constexpr std::array<Relaxation, 5> kPasses{{
      {false, false, 0},
      {true, false, 0},
      {false, true, 0},
      {false, false, 4},
      {true, true, 4},
  }};
  for (const Relaxation& relax : kPasses) {
    // Less than one strong entry left unexplained: nothing left to fix.
    if (best.best_cost() < 1.0) break;
    if (budget == 0) break;
    search_candidates(ev, set.c,
                      enumerate_candidates(ev, options.classifier.leading, match_tol, relax, seen, budget),
                      match_tol, best);
  }
  if (best.empty()) return std::nullopt;

  // Settle near-ties with amplitudes: polish each result's geometry, then
  // charge entries it leaves unexplained and strong arrivals it predicts
  // where there is nothing.
  std::optional<EstimatedConfig> chosen;
  Score chosen_score;
  const double floor = amplitude_floor(set.entries);
  for (const SearchResult& r : best.items()) {
    if (r.score.cost > best.best_cost() + kShortlistMargin) continue;
    EstimatedConfig est = r.est;
    CoefficientEstimate co = estimate_reflection_coefficients(est);
    refine_overlapped_coefficients(est.config, set, co);
    for (std::size_t w = 0; w < 6; ++w) est.config.betas[w] = std::clamp(co.betas[w], 0.0, 1.0);
    est.config = refine_geometry(est.config, set, set.tol);
    Score score;
    score.cost = 0.0;
    score.ss = 0.0;
    for (const PathEntry& u : unexplained_entries(est.config, set, set.tol)) score.cost += ev.of(u.a);
    for (const Pulse& p : enumerate_pulses(est.config, 2)) {
      const std::size_t k = account_for(set.entries, p.path_length, p.amplitude, set.tol, floor);
      if (k == std::string::npos) {
        if (p.amplitude > ev.visible()) score.cost += ev.of(p.amplitude);
        continue;
      }
      score.ss += (set.entries[k].d - p.path_length) * (set.entries[k].d - p.path_length);
    }
    if (!chosen || chosen_score.worse_than(score)) {
      chosen = est;
      chosen_score = score;
    }
  }
  return chosen;
}

}  // namespace

RoomEstimate estimate_room(const PathLengthSet& set, const EstimatorOptions& options) {
  const double closure_tol = options.closure_factor * set.tol;
  RoomEstimate out;
  std::optional<EstimatedConfig> primary;
  std::optional<ClassifiedReflections> cls;
  std::exception_ptr primary_error;

  try {
    cls = classify_reflections(set, options.classifier);
    primary = estimate_configuration(*cls, set.tol);
  } catch (const ClassificationFailure&) {
    primary_error = std::current_exception();
  } catch (const EstimationFailure&) {
    primary_error = std::current_exception();
  }

  bool accepted = false;
  if (primary && closure_residual(primary->config, set) <= closure_tol) {
    out.estimate = *primary;
    out.classification = cls;
    accepted = true;
  }
  if (!accepted && options.fallback) {
    if (auto found = search_first_order(set, options, closure_tol)) {
      out.estimate = *found;
      out.used_fallback = true;
      accepted = true;
    }
  }
  if (!accepted) {
    if (!primary) std::rethrow_exception(primary_error);
    out.estimate = *primary;
    out.classification = cls;
  }

  out.coefficients = estimate_reflection_coefficients(out.estimate);
  refine_overlapped_coefficients(out.estimate.config, set, out.coefficients);
  for (std::size_t w = 0; w < 6; ++w)
    out.estimate.config.betas[w] = std::clamp(out.coefficients.betas[w], 0.0, 1.0);
  out.estimate.config = refine_geometry(out.estimate.config, set, set.tol);
  out.closure_residual = closure_residual(out.estimate.config, set);
  out.closure_ok = out.closure_residual <= closure_tol;
  out.unexplained = unexplained_entries(out.estimate.config, set, set.tol);
  if (out.used_fallback) out.estimate.erroneous = out.unexplained;
  return out;
}

}  // namespace roomest
