#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "roomest/acoustic_model.hpp"
#include "roomest/bench_harness.hpp"
#include "roomest/degeneracy.hpp"

using namespace roomest;

namespace {

RoomConfig example_room() {
  RoomConfig r;
  r.dims = {4, 5, 3};
  r.source = {1, 2, 1.5};
  r.receiver = {2.5, 4, 1.2};
  r.betas = {0.9, 0.8, 0.7, 0.6, 0.5, 0.4};
  return r;
}

// (toa, amplitude) multiset equality by greedy matching.
bool same_rir(const RoomConfig& a, const RoomConfig& b, double tol) {
  const PulseList pa = enumerate_pulses(a, 2), pb = enumerate_pulses(b, 2);
  if (pa.size() != pb.size()) return false;
  std::vector<char> used(pb.size(), 0);
  for (const Pulse& p : pa) {
    bool hit = false;
    for (std::size_t k = 0; k < pb.size() && !hit; ++k) {
      if (used[k] || std::abs(pb[k].toa - p.toa) > tol || std::abs(pb[k].amplitude - p.amplitude) > tol)
        continue;
      used[k] = 1;
      hit = true;
    }
    if (!hit) return false;
  }
  return true;
}

}  // namespace

TEST(Transforms, GroupSizes) {
  const auto std96 = all_transforms(DegeneracyGroup::kStandard);
  const auto full = all_transforms(DegeneracyGroup::kFull);
  EXPECT_EQ(std96.size(), 96u);
  EXPECT_EQ(full.size(), 384u);
  for (std::size_t i = 0; i < std96.size(); ++i)
    for (std::size_t j = i + 1; j < std96.size(); ++j) EXPECT_FALSE(std96[i] == std96[j]);
}

TEST(Apply, Identity) {
  EXPECT_TRUE(approx_equal(apply(DegeneracyTransform{}, example_room()), example_room()));
}

TEST(Apply, SwapSourceReceiver) {
  DegeneracyTransform t;
  t.swap_sr = true;
  const RoomConfig out = apply(t, example_room());
  EXPECT_EQ(out.source, example_room().receiver);
  EXPECT_EQ(out.receiver, example_room().source);
  EXPECT_EQ(out.dims, example_room().dims);
  EXPECT_EQ(out.betas, example_room().betas);
}

TEST(Apply, MirrorX) {
  DegeneracyTransform t;
  t.mirror = {true, false, false};
  const RoomConfig out = apply(t, example_room());
  EXPECT_DOUBLE_EQ(out.source[0], 3.0);
  EXPECT_DOUBLE_EQ(out.receiver[0], 1.5);
  EXPECT_DOUBLE_EQ(out.source[1], 2.0);
  EXPECT_DOUBLE_EQ(out.betas[0], 0.8);
  EXPECT_DOUBLE_EQ(out.betas[1], 0.9);
  EXPECT_DOUBLE_EQ(out.betas[2], 0.7);
  EXPECT_TRUE(same_rir(example_room(), out, 1e-12));
}

TEST(Apply, AxisPermutationMovesBetaPairs) {
  DegeneracyTransform t;
  t.axis_permutation = {1, 2, 0};
  const RoomConfig r = example_room();
  const RoomConfig out = apply(t, r);
  // whatever the convention, the dims and beta pairs travel together
  for (int a = 0; a < 3; ++a) {
    int from = -1;
    for (int b = 0; b < 3; ++b)
      if (r.dims[b] == out.dims[a]) from = b;
    ASSERT_GE(from, 0);
    EXPECT_EQ(out.source[a], r.source[from]);
    EXPECT_EQ(out.betas[2 * a], r.betas[2 * from]);
    EXPECT_EQ(out.betas[2 * a + 1], r.betas[2 * from + 1]);
  }
  EXPECT_TRUE(same_rir(r, out, 1e-12));
}

TEST(Group, ClosureAndInverse) {
  const auto all = all_transforms(DegeneracyGroup::kFull);
  const RoomConfig r = example_room();
  for (std::size_t i = 0; i < all.size(); i += 7) {
    const DegeneracyTransform inv = inverse(all[i]);
    EXPECT_TRUE(approx_equal(apply(inv, apply(all[i], r)), r, 1e-12));
    for (std::size_t j = 0; j < all.size(); j += 11) {
      const DegeneracyTransform c = compose(all[j], all[i]);
      EXPECT_NE(std::find(all.begin(), all.end(), c), all.end());
      EXPECT_TRUE(approx_equal(apply(c, r), apply(all[j], apply(all[i], r)), 1e-12));
    }
  }
}

TEST(Equivalents, GenericRoomHas96) {
  EXPECT_EQ(equivalents(example_room()).size(), 96u);
}

TEST(Equivalents, SymmetricCubeCollapses) {
  RoomConfig cube;
  cube.dims = {3, 3, 3};
  cube.source = {1.5, 1.5, 1.5};
  cube.receiver = {1.5, 1.5, 1.5};
  EXPECT_EQ(equivalents(cube).size(), 1u);
  cube.receiver = {1.0, 1.5, 1.5};
  const auto orbit = equivalents(cube);
  EXPECT_LT(orbit.size(), 96u);
  EXPECT_GT(orbit.size(), 1u);
}

TEST(Equivalents, WholeOrbitSharesRir) {
  ExperimentSettings s;
  s.seed = 41;
  for (std::size_t i = 0; i < 10; ++i) {
    const RoomConfig r = random_room(s, i);
    for (const RoomConfig& m : equivalents(r, DegeneracyGroup::kFull))
      EXPECT_TRUE(same_rir(r, m, 1e-9));
  }
}

TEST(Equivalents, FirstOrderTimesConstantOverOrbit) {
  const RoomConfig r = example_room();
  auto firsts = [](const RoomConfig& c) {
    std::multiset<double> t;
    for (const Pulse& p : enumerate_pulses(c, 1))
      if (p.order == 1) t.insert(std::round(p.toa * 1e12));
    return t;
  };
  const auto ref = firsts(r);
  for (const RoomConfig& m : equivalents(r)) EXPECT_EQ(firsts(m), ref);
}

TEST(Canonical, SameForWholeOrbit) {
  const RoomConfig r = example_room();
  const RoomConfig c = canonical(r);
  for (const RoomConfig& m : equivalents(r)) EXPECT_TRUE(approx_equal(canonical(m), c, 1e-12));
}

TEST(AlignedErrors, Examples) {
  const RoomConfig r = example_room();
  const ErrorReport zero = aligned_errors(r, r);
  EXPECT_EQ(zero.geometry_rmse, 0.0);
  EXPECT_EQ(zero.beta_rmse, 0.0);
  EXPECT_FALSE(zero.failed);

  DegeneracyTransform t;
  t.mirror = {true, false, false};
  const ErrorReport mirrored = aligned_errors(r, apply(t, r));
  EXPECT_LT(mirrored.receiver_rmse + mirrored.source_rmse + mirrored.beta_rmse, 1e-12);

  RoomConfig off = r;
  off.dims[0] += 0.1;
  EXPECT_NEAR(aligned_errors(r, off).geometry_rmse, 0.1 / std::sqrt(3.0), 1e-12);
}

TEST(AlignedErrors, ZeroOverStandardOrbit) {
  ExperimentSettings s;
  s.seed = 42;
  for (std::size_t i = 0; i < 10; ++i) {
    const RoomConfig r = random_room(s, i);
    for (const DegeneracyTransform& t : all_transforms()) {
      const ErrorReport e = aligned_errors(r, apply(t, r));
      EXPECT_EQ(e.geometry_rmse + e.receiver_rmse + e.source_rmse + e.beta_rmse, 0.0);
    }
  }
}

TEST(AlignedErrors, FailureFlag) {
  const RoomConfig r = example_room();
  RoomConfig bad = r;
  bad.dims = {6, 7, 5};
  bad.source = {3, 4, 2};
  bad.receiver = {5, 6, 4};
  EXPECT_TRUE(aligned_errors(r, bad).failed);
}
