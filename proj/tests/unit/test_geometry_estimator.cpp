#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oracle/mirror_unfolding.hpp"
#include "oracle/sloped_room.hpp"
#include "roomest/acoustic_model.hpp"
#include "roomest/bench_harness.hpp"
#include "roomest/degeneracy.hpp"
#include "roomest/error.hpp"
#include "roomest/geometry_estimator.hpp"
#include "roomest/reflection_classifier.hpp"

using namespace roomest;

namespace {

RoomConfig example_room() {
  RoomConfig r;
  r.dims = {4, 5, 3};
  r.source = {1, 2, 1.5};
  r.receiver = {2.5, 4, 1.2};
  return r;
}

constexpr double kTinyTol = 343.0 * 1e-4 / 44100.0;

PathLengthSet exact_set(const RoomConfig& room, double tol = kTinyTol) {
  return pulses_to_pathlengths(enumerate_pulses(room, 2), room.c, tol);
}

// Every arrival kept separate, but matched with a sampled-scale tolerance.
PathLengthSet unmerged_set(const RoomConfig& room, double tol) {
  PathLengthSet set = exact_set(room);
  set.tol = tol;
  return set;
}

}  // namespace

TEST(SolveDirection, ExampleRoom) {
  const DirectionSolution s =
      solve_direction(std::sqrt(6.34), std::sqrt(24.34), std::sqrt(16.34), std::sqrt(46.34));
  EXPECT_NEAR(s.L, 4.0, 1e-12);
  EXPECT_NEAR(s.u, 1.5, 1e-12);
  EXPECT_NEAR(s.v, 4.5, 1e-12);
  EXPECT_NEAR(s.W, 4.09, 1e-12);
  EXPECT_NEAR(s.sibling_pred, std::sqrt(94.34), 1e-12);
  // the mirror image of the true x placement
  EXPECT_NEAR(s.source(), 3.0, 1e-12);
  EXPECT_NEAR(s.receiver(), 1.5, 1e-12);

  RoomConfig mirrored = example_room();
  mirrored.source[0] = 3.0;
  mirrored.receiver[0] = 1.5;
  EXPECT_EQ(aligned_errors(example_room(), mirrored).geometry_rmse, 0.0);
  EXPECT_LT(aligned_errors(example_room(), mirrored).source_rmse, 1e-12);
}

TEST(SolveDirection, SymmetricPlacement) {
  RoomConfig r = example_room();
  r.source[0] = 2.0;
  r.receiver[0] = 2.0;
  const PulseList p = enumerate_pulses(r, 2);
  const auto x = oracle::unfold(oracle::shoebox(r.dims, r.betas), r.source, r.receiver);
  std::vector<double> first, second;
  for (const auto& a : x) {
    if (a.walls.size() == 1 && a.walls[0] < 2) first.push_back(a.d);
    if (a.walls.size() == 2 && a.walls[0] < 2 && a.walls[1] < 2) second.push_back(a.d);
  }
  ASSERT_EQ(first.size(), 2u);
  ASSERT_EQ(second.size(), 2u);
  EXPECT_NEAR(first[0], first[1], 1e-12);
  const DirectionSolution s = solve_direction(p.front().path_length, first[0], first[1], second[0]);
  EXPECT_NEAR(s.u, 0.0, 1e-9);
  EXPECT_NEAR(s.v, 4.0, 1e-9);
  EXPECT_NEAR(s.L, 4.0, 1e-9);
}

TEST(SolveDirection, MixedDirectionsRejected) {
  // x first-order, y first-order, z single-direction second order. The closed
  // form alone lets a few of these through; none survives the sibling check.
  const double d0 = std::sqrt(6.34);
  const auto x = oracle::unfold(oracle::shoebox({4, 5, 3}, {1, 1, 1, 1, 1, 1}), {1, 2, 1.5},
                                {2.5, 4, 1.2});
  std::array<std::vector<double>, 3> first, second;
  for (const auto& a : x) {
    if (a.walls.size() == 1) first[a.walls[0] / 2].push_back(a.d);
    if (a.walls.size() == 2 && a.walls[0] / 2 == a.walls[1] / 2) second[a.walls[0] / 2].push_back(a.d);
  }
  std::vector<double> singles;
  for (const auto& s : second) singles.insert(singles.end(), s.begin(), s.end());
  int tried = 0, closed_form_rejects = 0;
  for (double da : first[0])
    for (double db : first[1])
      for (double dc : second[2]) {
        ++tried;
        const auto sol = try_solve_direction(d0, da, db, dc);
        if (!sol) {
          ++closed_form_rejects;
          EXPECT_THROW(solve_direction(d0, da, db, dc), InconsistentHypothesis);
          continue;
        }
        for (double other : singles)
          if (other != dc) EXPECT_GT(std::abs(sol->sibling_pred - other), 0.0389);
      }
  EXPECT_EQ(tried, 8);
  EXPECT_GE(closed_form_rejects, 4);
}

TEST(SolveDirection, CrossDirectionConsistency) {
  ExperimentSettings s;
  s.seed = 31;
  for (std::size_t i = 0; i < 100; ++i) {
    const RoomConfig room = random_room(s, i);
    const PathLengthSet set = exact_set(room);
    const EstimatedConfig est = estimate_configuration(classify_reflections(set), set.tol);
    const double d0 = set.entries.front().d;
    double sum = 0;
    for (const auto& dir : est.directions) sum += dir.solution.u * dir.solution.u;
    EXPECT_NEAR(sum, d0 * d0, 1e-9);
    for (int a = 0; a < 3; ++a) {
      const double b = est.directions[(a + 1) % 3].solution.u, c = est.directions[(a + 2) % 3].solution.u;
      EXPECT_NEAR(est.directions[a].solution.W, b * b + c * c, 1e-9);
    }
  }
}

TEST(EstimateConfiguration, ExampleRoomClean) {
  const PathLengthSet set = exact_set(example_room());
  const EstimatedConfig est = estimate_configuration(classify_reflections(set), set.tol);
  std::array<double, 3> dims = est.config.dims;
  std::sort(dims.begin(), dims.end());
  EXPECT_NEAR(dims[0], 3.0, 1e-9);
  EXPECT_NEAR(dims[1], 4.0, 1e-9);
  EXPECT_NEAR(dims[2], 5.0, 1e-9);
  const ErrorReport e = aligned_errors(example_room(), est.config);
  EXPECT_LT(e.max_abs_position, 1e-9);
  EXPECT_TRUE(est.erroneous.empty());
}

TEST(EstimateConfiguration, SpuriousSingleReportedErroneous) {
  const PathLengthSet set = exact_set(example_room());
  ClassifiedReflections cls = classify_reflections(set);
  const PathEntry fake{8.123, 0.002};
  cls.s2_single.push_back(fake);
  std::sort(cls.s2_single.begin(), cls.s2_single.end(),
            [](const PathEntry& a, const PathEntry& b) { return a.d < b.d; });
  const EstimatedConfig est = estimate_configuration(cls, set.tol);
  EXPECT_LT(aligned_errors(example_room(), est.config).max_abs_position, 1e-9);
  ASSERT_EQ(est.erroneous.size(), 1u);
  EXPECT_EQ(est.erroneous[0].d, fake.d);
}

TEST(EstimateConfiguration, RequiresFullFirstOrderSets) {
  const PathLengthSet set = exact_set(example_room());
  ClassifiedReflections cls = classify_reflections(set);
  cls.first_order[1].pop_back();
  EXPECT_THROW(estimate_configuration(cls, set.tol), InvalidArgument);
}

TEST(EstimateConfiguration, SlopedCeilingFailsOnZ) {
  std::mt19937_64 rng(77);
  for (int k = 0; k < 10; ++k) {
    const oracle::SlopedCase sc = oracle::make_sloped_case(rng, 343.0, kTinyTol);
    try {
      (void)estimate_configuration(sc.cls, kTinyTol);
      FAIL() << "case " << k << " accepted a tilted wall pair";
    } catch (const EstimationFailure& f) {
      EXPECT_EQ(f.axis(), Axis::kZ);
      EXPECT_EQ(f.solved_count(), 2);
      ASSERT_TRUE(f.partial()[0].has_value());
      EXPECT_NEAR(f.partial()[0]->solution.L, sc.dims[0], 1e-9);
      EXPECT_NEAR(f.partial()[1]->solution.L, sc.dims[1], 1e-9);
    }
  }
}

TEST(EstimateConfiguration, ReproducesEveryInputArrival) {
  ExperimentSettings s;
  s.seed = 32;
  s.beta_low = 0.3;
  for (std::size_t i = 0; i < 100; ++i) {
    const RoomConfig room = random_room(s, i);
    const PathLengthSet set = exact_set(room);
    const RoomEstimate est = estimate_room(set);
    const PulseList back = enumerate_pulses(est.estimate.config, 2);
    ASSERT_EQ(back.size(), set.size());
    // one-to-one: both sorted, so compare in order
    for (std::size_t k = 0; k < back.size(); ++k)
      EXPECT_NEAR(back[k].path_length, set.entries[k].d, 1e-9) << "room " << i;
    EXPECT_TRUE(est.unexplained.empty());
    EXPECT_TRUE(est.closure_ok);
    EXPECT_LT(est.closure_residual, 1e-9);
  }
}

// Each verifying assignment gives the true pair of coordinates up to the
// mirror about L/2 and, per axis, exchanging source and receiver; both leave
// every order-2 path length unchanged.
TEST(EstimateConfiguration, BothAssignmentsAreEquivalent) {
  ExperimentSettings s;
  s.seed = 33;
  for (std::size_t i = 0; i < 50; ++i) {
    const RoomConfig room = random_room(s, i);
    const auto arrivals =
        oracle::unfold(oracle::shoebox(room.dims, room.betas), room.source, room.receiver);
    const double d0 = arrivals.front().d;
    for (int a = 0; a < 3; ++a) {
      std::vector<double> first, second;
      for (const auto& x : arrivals) {
        if (x.walls.size() == 1 && x.walls[0] / 2 == a) first.push_back(x.d);
        if (x.walls.size() == 2 && x.walls[0] / 2 == a && x.walls[1] / 2 == a) second.push_back(x.d);
      }
      int verified = 0;
      for (int swap = 0; swap < 2; ++swap)
        for (int pick = 0; pick < 2; ++pick) {
          const auto sol = try_solve_direction(d0, first[swap], first[1 - swap], second[pick]);
          if (!sol || std::abs(sol->sibling_pred - second[1 - pick]) > 1e-9) continue;
          ++verified;
          EXPECT_NEAR(sol->L, room.dims[a], 1e-9);
          const double xs = room.source[a], xr = room.receiver[a], L = room.dims[a];
          auto pair_is = [&](double p, double q) {
            const double s1 = sol->source(), r1 = sol->receiver();
            return (std::abs(s1 - p) < 1e-9 && std::abs(r1 - q) < 1e-9) ||
                   (std::abs(s1 - q) < 1e-9 && std::abs(r1 - p) < 1e-9);
          };
          EXPECT_TRUE(pair_is(xs, xr) || pair_is(L - xs, L - xr)) << "room " << i << " axis " << a;
        }
      EXPECT_GE(verified, 1);
    }
  }
}

TEST(ReflectionCoefficients, FirstOrderInversion) {
  RoomConfig room = example_room();
  room.betas = {0.8, 0.6, 0.9, 0.7, 0.5, 0.95};
  const PathLengthSet set = exact_set(room);
  const EstimatedConfig est = estimate_configuration(classify_reflections(set), set.tol);
  const CoefficientEstimate coef = estimate_reflection_coefficients(est);
  EXPECT_TRUE(coef.valid);
  for (double r : coef.second_order_residuals) EXPECT_NEAR(r, 0.0, 1e-12);

  RoomConfig found = est.config;
  found.betas = coef.betas;
  EXPECT_LT(aligned_errors(room, found).max_abs_beta, 1e-9);

  // the x pair by hand
  const double d = std::sqrt(16.34);
  EXPECT_NEAR(d, 4.04228, 1e-5);
  EXPECT_NEAR(4.0 * kPi * d * (0.8 / (4.0 * kPi * d)), 0.8, 1e-15);
  EXPECT_NEAR(0.8 * 0.6 / (4.0 * kPi * std::sqrt(46.34)),
              [&] {
                for (const PathEntry& e : set.entries)
                  if (std::abs(e.d - std::sqrt(46.34)) < 1e-9) return e.a;
                return -1.0;
              }(),
              1e-15);
}

TEST(ReflectionCoefficients, UnitWalls) {
  ExperimentSettings s;
  s.seed = 34;
  for (std::size_t i = 0; i < 30; ++i) {
    RoomConfig room = random_room(s, i);
    room.betas.fill(1.0);
    const PathLengthSet set = exact_set(room);
    const CoefficientEstimate c =
        estimate_reflection_coefficients(estimate_configuration(classify_reflections(set), set.tol));
    for (double b : c.betas) EXPECT_NEAR(b, 1.0, 1e-9);
  }
}

TEST(ReflectionCoefficients, OutOfRangeFlagged) {
  RoomConfig room = example_room();
  const PathLengthSet set = exact_set(room);
  EstimatedConfig est = estimate_configuration(classify_reflections(set), set.tol);
  est.directions[1].near.a *= 1.2;
  EXPECT_FALSE(estimate_reflection_coefficients(est).valid);
  est.directions[1].near.a /= 1.2;
  est.directions[1].near.a *= 1.04;
  EXPECT_TRUE(estimate_reflection_coefficients(est).valid);
}

TEST(OverlapRefinement, LeavesValidEstimatesAlone) {
  RoomConfig room = example_room();
  room.betas = {0.8, 0.6, 0.9, 0.7, 0.5, 0.95};
  const PathLengthSet set = exact_set(room);
  const EstimatedConfig est = estimate_configuration(classify_reflections(set), set.tol);
  CoefficientEstimate c = estimate_reflection_coefficients(est);
  const CoefficientEstimate before = c;
  refine_overlapped_coefficients(est.config, set, c);
  EXPECT_EQ(c.betas, before.betas);
  for (bool r : c.refined) EXPECT_FALSE(r);
}

TEST(OverlapRefinement, PeelsCoincidentArrival) {
  // a first-order arrival of wall x1 that shares its peak with another
  // arrival not touching x1: the measured height is the sum of both
  ExperimentSettings s;
  s.seed = 35;
  s.beta_low = 0.85;
  int checked = 0;
  for (std::size_t i = 0; i < 200 && checked < 10; ++i) {
    const RoomConfig room = random_room(s, i);
    const PulseList pulses = enumerate_pulses(room, 2);
    const Pulse* own = nullptr;
    for (const Pulse& p : pulses)
      if (p.order == 1 && p.index.p[0] == 1 && p.index.m[0] == 0) own = &p;
    ASSERT_NE(own, nullptr);
    const Pulse* other = nullptr;
    for (const Pulse& p : pulses)
      if (&p != own && (!other || std::abs(p.path_length - own->path_length) <
                                      std::abs(other->path_length - own->path_length)))
        other = &p;
    const bool touches_x1 = std::abs(other->index.m[0] - other->index.p[0]) != 0;
    const double gap = std::abs(other->path_length - own->path_length);
    if (touches_x1 || gap > 0.1) continue;

    PathLengthSet set = exact_set(room, gap * 1.001);
    const double inflated = 4.0 * kPi * own->path_length * (own->amplitude + other->amplitude);
    if (inflated <= 1.0 + kBetaSlack) continue;
    CoefficientEstimate c;
    c.betas = room.betas;
    c.betas[0] = inflated;
    c.valid = false;
    refine_overlapped_coefficients(room, set, c);
    EXPECT_TRUE(c.refined[0]);
    EXPECT_FALSE(c.refined[1]);
    EXPECT_NEAR(c.betas[0], room.betas[0], 1e-9) << "room " << i;
    EXPECT_TRUE(c.valid);
    ++checked;
  }
  EXPECT_GT(checked, 0);
}

TEST(GeometryPolish, ExactInputStaysExact) {
  ExperimentSettings s;
  s.seed = 36;
  for (std::size_t i = 0; i < 20; ++i) {
    const RoomConfig room = random_room(s, i);
    const PathLengthSet set = unmerged_set(room, 0.0389);
    const RoomConfig out = refine_geometry(room, set, set.tol);
    EXPECT_LT(aligned_errors(room, out).max_abs_position, 1e-9);
    EXPECT_LT(aligned_errors(room, out).max_abs_geometry, 1e-9);
  }
}

TEST(GeometryPolish, PullsNearbyStartOntoData) {
  ExperimentSettings s;
  s.seed = 37;
  int improved = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    const RoomConfig room = random_room(s, i);
    const PathLengthSet set = unmerged_set(room, 0.0389);
    RoomConfig start = room;
    start.dims[0] += 0.01;
    start.source[1] -= 0.01;
    start.receiver[2] += 0.008;
    const double before = aligned_errors(room, start).max_abs_position +
                          aligned_errors(room, start).max_abs_geometry;
    const RoomConfig out = refine_geometry(start, set, set.tol);
    const double after = aligned_errors(room, out).max_abs_position +
                         aligned_errors(room, out).max_abs_geometry;
    EXPECT_LE(after, before + 1e-12);
    if (after < 1e-6) ++improved;
  }
  EXPECT_GE(improved, 15);
}
