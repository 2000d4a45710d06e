#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "roomest/acoustic_model.hpp"
#include "roomest/bench_harness.hpp"
#include "roomest/error.hpp"
#include "roomest/pulse_extraction.hpp"

using namespace roomest;

namespace {

constexpr double kFs = 44100.0;
constexpr double kC = 343.0;

Pulse at(double d, double a) {
  Pulse p;
  p.path_length = d;
  p.toa = d / kC;
  p.amplitude = a;
  return p;
}

}  // namespace

TEST(PulsesToPathLengths, SingleAndExampleRoom) {
  const Pulse direct = at(2.0, 0.1);
  const PathLengthSet one = pulses_to_pathlengths(std::span<const Pulse>(&direct, 1), kC, 0.01);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_DOUBLE_EQ(one.entries[0].d, 2.0);
  EXPECT_DOUBLE_EQ(one.tol, 0.01);

  RoomConfig r;
  r.dims = {4, 5, 3};
  r.source = {1, 2, 1.5};
  r.receiver = {2.5, 4, 1.2};
  const PathLengthSet set = pulses_to_pathlengths(enumerate_pulses(r, 2), kC, 1e-6);
  ASSERT_EQ(set.size(), 25u);
  EXPECT_NEAR(set.entries[0].d, 2.51794, 1e-5);
}

TEST(PulsesToPathLengths, MergesKeepingLarger) {
  const std::vector<Pulse> p{at(3.0, 0.2), at(3.0 + 1e-6, 0.5)};
  const PathLengthSet set = pulses_to_pathlengths(p, kC, 0.01);
  ASSERT_EQ(set.size(), 1u);
  EXPECT_DOUBLE_EQ(set.entries[0].a, 0.5);
}

TEST(PulsesToPathLengths, EmptyThrows) {
  EXPECT_THROW(pulses_to_pathlengths({}, kC, 0.01), InvalidArgument);
}

TEST(MergeCloseEntries, NoTwoWithinTol) {
  std::vector<PathEntry> e;
  for (int k = 0; k < 50; ++k) e.push_back({1.0 + 0.004 * (k * k % 7) + 0.003 * k, 0.01 * (k % 5 + 1)});
  std::sort(e.begin(), e.end(), [](const PathEntry& a, const PathEntry& b) { return a.d < b.d; });
  const auto merged = merge_close_entries(e, 0.01);
  for (std::size_t k = 1; k < merged.size(); ++k) EXPECT_GT(merged[k].d - merged[k - 1].d, 0.01);
}

TEST(DetectPeaks, SinglePulseAtSample1000) {
  Pulse p;
  p.toa = 1000.0 / kFs;
  p.amplitude = 0.3;
  const SampledRir rir = render_rir(std::span<const Pulse>(&p, 1), kFs, 4096);
  const PathLengthSet set = detect_peaks(rir, kC);
  ASSERT_GE(set.size(), 1u);
  const auto top = std::max_element(set.entries.begin(), set.entries.end(),
                                    [](const PathEntry& a, const PathEntry& b) { return a.a < b.a; });
  EXPECT_NEAR(top->d, 1000.0 / kFs * kC, set.tol);
  EXPECT_NEAR(top->d, 7.778, 1e-3);
  EXPECT_NEAR(set.tol, kC * 5.0 / kFs, 1e-12);
}

TEST(DetectPeaks, SilenceThrows) {
  SampledRir rir;
  rir.fs = kFs;
  rir.samples.assign(1000, 0.0f);
  EXPECT_THROW(detect_peaks(rir, kC), NoPeakFound);
}

TEST(DetectPeaks, FractionalPositionRefined) {
  Pulse p;
  p.toa = 1000.37 / kFs;
  p.amplitude = 1.0;
  const SampledRir rir = render_rir(std::span<const Pulse>(&p, 1), kFs, 4096);
  const PathLengthSet set = detect_peaks(rir, kC);
  const auto top = std::max_element(set.entries.begin(), set.entries.end(),
                                    [](const PathEntry& a, const PathEntry& b) { return a.a < b.a; });
  // closer than rounding to the nearest sample would get
  EXPECT_LT(std::abs(top->d / kC * kFs - 1000.37), 0.3);
}

TEST(ParabolicRefine, SymmetricPeakStaysPut) {
  const std::vector<float> env{0.0f, 0.5f, 1.0f, 0.5f, 0.0f};
  const RefinedPeak pk = parabolic_refine(env, 2);
  EXPECT_DOUBLE_EQ(pk.position, 2.0);
  EXPECT_DOUBLE_EQ(pk.height, 1.0);
  const std::vector<float> skew{0.0f, 0.5f, 1.0f, 1.0f, 0.0f};
  EXPECT_DOUBLE_EQ(parabolic_refine(skew, 2).position, 2.5);
}

TEST(DetectPeaks, RoundTripRandomRooms) {
  ExperimentSettings s;
  s.seed = 5;
  PeakDetectOptions opt;
  for (std::size_t i = 0; i < 40; ++i) {
    const RoomConfig room = random_room(s, i);
    const PulseList pulses = enumerate_pulses(room, 2);
    const std::size_t len = static_cast<std::size_t>(pulses.back().toa * kFs) + 64;
    const SampledRir rir = render_rir(pulses, kFs, len);
    const PathLengthSet set = detect_peaks(rir, kC, opt);
    ASSERT_TRUE(std::is_sorted(set.entries.begin(), set.entries.end(),
                               [](const PathEntry& a, const PathEntry& b) { return a.d < b.d; }));
    for (std::size_t k = 1; k < set.size(); ++k)
      EXPECT_GT(set.entries[k].d - set.entries[k - 1].d, set.tol);
    double peak = 0;
    for (const Pulse& p : pulses) peak = std::max(peak, p.amplitude);
    for (const Pulse& p : pulses) {
      // weak pulses may be missing, strong ones must be found in place;
      // arrivals within tol of each other fuse into one peak somewhere in between
      if (p.amplitude < 0.05 * peak) continue;
      bool crowded = false;
      for (const Pulse& q : pulses)
        crowded |= &q != &p && std::abs(q.path_length - p.path_length) <= set.tol;
      double best = 1e9;
      for (const PathEntry& e : set.entries) best = std::min(best, std::abs(e.d - p.path_length));
      EXPECT_LE(best, crowded ? 2.0 * set.tol : set.tol) << "room " << i << " d=" << p.path_length;
    }
    const PathLengthSet again = detect_peaks(rir, kC, opt);
    EXPECT_EQ(again.entries, set.entries);
  }
}

TEST(DetectPeaks, MaxCountKeepsLargest) {
  std::vector<Pulse> p;
  for (int k = 0; k < 10; ++k) {
    Pulse q;
    q.toa = (200.0 + 100.0 * k) / kFs;
    q.amplitude = 0.1 * (k + 1);
    p.push_back(q);
  }
  const SampledRir rir = render_rir(p, kFs, 2048);
  PeakDetectOptions opt;
  opt.max_count = 3;
  const PathLengthSet set = detect_peaks(rir, kC, opt);
  ASSERT_EQ(set.size(), 3u);
  for (const PathEntry& e : set.entries) EXPECT_GT(e.a, 0.75);
}
