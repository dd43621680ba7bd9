// Copyright 2026 The pulsealign Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pulsealign/synth.hpp"
#include "pulsealign/timebase.hpp"

using namespace pulsealign;

namespace {

std::vector<double> uniform_stream(std::size_t n, double period, double start = 0.0) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = start + static_cast<double>(i) * period;
  return t;
}

}  // namespace

TEST(GapStats, PopulationStd) {
  const std::vector<double> t{0.0, 1.0, 3.0, 6.0};
  const auto g = timegap_stats(t);
  EXPECT_EQ(g.n, 3u);
  EXPECT_DOUBLE_EQ(g.mean, 2.0);
  EXPECT_NEAR(g.std, std::sqrt(2.0 / 3.0), 1e-15);
}

TEST(GapStats, SingleSampleRejected) {
  const std::vector<double> t{1.0};
  EXPECT_THROW(timegap_stats(t), Error);
}

TEST(RobustTimestep, ExcludesOutlierGap) {
  std::vector<double> t = uniform_stream(50, 0.01);
  for (std::size_t i = 25; i < t.size(); ++i) t[i] += 0.5;  // one pause
  const auto e = robust_timestep(t, 3.0);
  EXPECT_EQ(e.n_excluded, 1u);
  EXPECT_NEAR(e.period, 0.01, 1e-12);
  EXPECT_NEAR(e.rate, 100.0, 1e-8);
}

TEST(RobustTimestep, ConstantGapsKeepAll) {
  const auto t = uniform_stream(10, 0.25);
  const auto e = robust_timestep(t, 3.0);
  EXPECT_EQ(e.n_excluded, 0u);
  EXPECT_DOUBLE_EQ(e.period, 0.25);
}

TEST(SyntheticGrid, FloorIndexIsExact) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  const SyntheticGrid g = make_grid(12.345, 0.0333, -1e3, 1e3);
  for (int i = 0; i < 10000; ++i) {
    const double t = u(gen);
    const auto k = g.floor_index(t);
    ASSERT_LE(g.point(k), t);
    ASSERT_GT(g.point(k + 1), t);
  }
  EXPECT_EQ(g.floor_index(g.point(17)), 17);
}

TEST(SyntheticGrid, CoversExtendedRange) {
  const auto t = uniform_stream(11, 1.0, 100.0);
  const auto g = synthesize_grid(t, 1.0, 0.5);
  EXPECT_DOUBLE_EQ(g.anchor, 105.0);
  EXPECT_LE(g.point(g.k_min), t.front() - 0.5);
  EXPECT_GT(g.point(g.k_min + 1), t.front() - 0.5);
  EXPECT_LE(g.point(g.k_max), t.back());
}

TEST(Allocate, CollisionShiftsEarlierSampleDown) {
  // Two stamps in the same cell: the earlier one moves to the previous point.
  const std::vector<double> t{0.0, 1.2, 1.5, 3.1};
  const SyntheticGrid g = make_grid(0.0, 1.0, -0.5, 3.1);
  const auto m = allocate(t, g);
  EXPECT_EQ(m.alloc, (std::vector<std::int64_t>{-1, 0, 1, 3}));
  const auto d = detect_drops(m, g);
  EXPECT_EQ(d.dropped_k, (std::vector<std::int64_t>{2}));
}

TEST(Allocate, UnderflowIsReported) {
  const std::vector<double> t{0.0, 0.1, 0.2};
  const SyntheticGrid g = make_grid(0.0, 1.0, 0.0, 0.2);
  try {
    allocate(t, g);
    FAIL() << "expected underflow";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("underflow"), std::string::npos);
  }
}

// Property: the closed-form allocation equals the grid-scan oracle and
// satisfies point(k_i) <= t_i with strictly increasing indices.
TEST(Allocate, MatchesScanOracle) {
  std::mt19937_64 gen(11);
  for (int inst = 0; inst < 300; ++inst) {
    std::uniform_int_distribution<int> nd(2, 200);
    std::uniform_real_distribution<double> pd(0.001, 0.05);
    const int n = nd(gen);
    const double period = pd(gen);
    std::exponential_distribution<double> gap(1.0 / period);
    std::vector<double> t{std::uniform_real_distribution<double>(-5, 5)(gen)};
    for (int i = 1; i < n; ++i) t.push_back(t.back() + gap(gen));
    const double delta = period * static_cast<double>(n);  // ample headroom
    const auto g = synthesize_grid(t, period, delta);
    const auto m = allocate(t, g);
    const auto o = oracle::allocate_scan(t, g.anchor, g.period, g.k_min, g.k_max);
    ASSERT_TRUE(o.has_value());
    ASSERT_EQ(m.alloc, *o);
    for (std::size_t i = 0; i < t.size(); ++i) {
      ASSERT_LE(g.point(m.alloc[i]), t[i]);
      if (i) {
        ASSERT_LT(m.alloc[i - 1], m.alloc[i]);
      }
    }
  }
}

TEST(PhaseCoherence, PerfectLattice) {
  const auto t = uniform_stream(1000, 0.02, 3.0);
  EXPECT_NEAR(phase_coherence(t, 0.02), 1.0, 1e-9);
  EXPECT_LT(phase_coherence(t, 0.0201), 0.5);
}

TEST(RefinePeriod, RecoversLatticeSpacing) {
  Rng rng(5);
  std::vector<double> t;
  for (int k = 0; k < 20000; ++k) t.push_back(k * 0.03333 + std::abs(rng.normal()) * 0.002);
  const auto r = refine_period(t, 0.03333 * 1.002, 0.005, 0.1);
  EXPECT_TRUE(r.applied);
  EXPECT_NEAR(r.period, 0.03333, 1e-9);
  EXPECT_GT(r.coherence, r.initial_coherence);
}

TEST(RefinePeriod, LowCoherenceLeavesEstimate) {
  Rng rng(9);
  std::vector<double> t{0.0};
  for (int k = 1; k < 5000; ++k) t.push_back(t.back() + 0.01 + rng.uniform() * 0.02);
  const auto r = refine_period(t, 0.02, 0.005, 0.1);
  EXPECT_FALSE(r.applied);
  EXPECT_DOUBLE_EQ(r.period, 0.02);
}

TEST(LatticePhase, PlacesGridBelowSampleCluster) {
  // Samples sit 0.3..0.5 of a period after each lattice point.
  Rng rng(3);
  std::vector<double> t;
  for (int k = 0; k < 500; ++k) t.push_back(k + 0.3 + 0.2 * rng.uniform());
  const auto a = lattice_phase_anchor(t, 1.0, mean_of(t), 0.45);
  ASSERT_TRUE(a.has_value());
  const double frac = *a - std::floor(*a);
  EXPECT_NEAR(frac, 0.3, 0.01);
}

TEST(LatticePhase, FindsEdgeUnderHeavyJitter) {
  // Half-normal delays of 0.4 periods wrap the cycle; the edge is still at 0.
  Rng rng(6);
  std::vector<double> t;
  for (int k = 0; k < 20000; ++k) t.push_back(k + 0.2 + 0.4 * std::abs(rng.normal()));
  const auto a = lattice_phase_anchor(t, 1.0, mean_of(t), 0.45);
  ASSERT_TRUE(a.has_value());
  const double frac = *a - std::floor(*a);
  EXPECT_NEAR(frac, 0.2, 0.005);
}

TEST(LatticePhase, UnstructuredResiduesAreRejected) {
  Rng rng(7);
  std::vector<double> t;
  for (int k = 0; k < 5000; ++k) t.push_back(k + rng.uniform());
  EXPECT_FALSE(lattice_phase_anchor(t, 1.0, mean_of(t), 0.45).has_value());
}

TEST(Dejitter, UniformStreamIsFixedPoint) {
  const auto t = uniform_stream(1000, 1.0 / 30.0, 12.0);
  const auto r = dejitter(t);
  EXPECT_DOUBLE_EQ(r.period, r.estimate.period);
  EXPECT_EQ(r.drops.count(), 0u);
  for (std::size_t i = 0; i < t.size(); ++i) ASSERT_NEAR(r.corrected[i], t[i], 1e-9);
  EXPECT_LT(r.after.std, 1e-9);
}

TEST(Dejitter, InvariantsOnJitteredStreams) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto s = gen_timestamps(3000, {0.02, HalfNormalDelay{0.004}, 0.002, seed});
    const auto& t = s.timestamps;
    for (bool refine : {false, true}) {
      for (bool align : {false, true}) {
        DejitterConfig cfg;
        cfg.refine_period = refine;
        cfg.align_phase = align;
        const auto r = dejitter(t, cfg);
        ASSERT_EQ(r.corrected.size(), t.size());
        for (std::size_t i = 0; i < t.size(); ++i) {
          ASSERT_LE(r.corrected[i], t[i]);
          if (i) {
            ASSERT_LT(r.corrected[i - 1], r.corrected[i]);
          }
          // every corrected gap is a whole number of periods
          if (i) {
            const double q = (r.corrected[i] - r.corrected[i - 1]) / r.period;
            ASSERT_NEAR(q, std::round(q), 1e-6);
          }
        }
        ASSERT_EQ(r.mapping.alloc.back() - r.mapping.alloc.front() + 1,
                  static_cast<std::int64_t>(t.size() + r.drops.count()));
        ASSERT_NEAR(r.drop_adjusted_mean(), r.period, 1e-12);
      }
    }
  }
}

TEST(Dejitter, DelayInvariance) {
  // Shifting the whole stream shifts the grid with it.
  const auto s = gen_timestamps(2000, {0.01, HalfNormalDelay{0.002}, 0.0, 4});
  std::vector<double> shifted = s.timestamps;
  for (double& v : shifted) v += 123.0;
  const auto a = dejitter(s.timestamps);
  const auto b = dejitter(shifted);
  EXPECT_NEAR(a.period, b.period, 1e-12);
  EXPECT_EQ(a.drops.count(), b.drops.count());
  for (std::size_t i = 0; i < shifted.size(); ++i) {
    ASSERT_NEAR(b.corrected[i] - a.corrected[i], 123.0, 1e-7);
  }
}

TEST(Dejitter, ConfigValidation) {
  const auto t = uniform_stream(10, 1.0);
  DejitterConfig bad;
  bad.m = 0.0;
  EXPECT_THROW(dejitter(t, bad), Error);
  bad = {};
  bad.delta = -1.0;
  EXPECT_THROW(dejitter(t, bad), Error);
  const std::vector<double> two{0.0, 1.0};
  EXPECT_THROW(dejitter(two), Error);
}

TEST(Dejitter, ZeroDeltaWithLateFirstSampleUnderflows) {
  // Second stamp sits right after the first, so the first must take the
  // point before it, which lies outside a grid with no extension.
  const std::vector<double> t{0.95, 0.99, 2.0, 3.0, 4.0, 5.0};
  DejitterConfig cfg;
  cfg.delta = 0.0;
  cfg.refine_period = false;
  cfg.align_phase = false;
  EXPECT_THROW(dejitter(t, cfg), Error);
  cfg.delta = 2.0;
  EXPECT_NO_THROW(dejitter(t, cfg));
}

// Hand-worked examples.

TEST(Examples, GapStatsUnevenGaps) {
  const std::vector<double> t{0.0, 0.010, 0.030};
  const auto g = timegap_stats(t);
  EXPECT_NEAR(g.mean, 0.015, 1e-15);
  EXPECT_NEAR(g.std, 0.005, 1e-15);
}

TEST(Examples, RobustTimestepNineteenGaps) {
  std::vector<double> t{0.0};
  for (int i = 0; i < 18; ++i) t.push_back(t.back() + 0.010);
  t.push_back(t.back() + 0.020);
  const auto e = robust_timestep(t, 3.0);
  EXPECT_NEAR(e.raw_mean, 0.2 / 19.0, 1e-15);
  EXPECT_NEAR(e.raw_std, 0.002233, 1e-6);
  EXPECT_EQ(e.n_excluded, 1u);
  EXPECT_NEAR(e.period, 0.010, 1e-15);
}

TEST(Examples, GridOddAndEvenCounts) {
  const std::vector<double> odd{0.0, 0.010, 0.020};
  const auto g = synthesize_grid(odd, 0.010, 0.0);
  EXPECT_NEAR(g.anchor, 0.010, 1e-15);
  EXPECT_NEAR(g.point(g.k_max), 0.020, 1e-15);

  const std::vector<double> even{0.0, 0.010, 0.020, 0.030};
  const auto h = synthesize_grid(even, 0.010, 0.0);
  EXPECT_NEAR(h.anchor, 0.015, 1e-15);
  EXPECT_NEAR(h.point(h.k_max), 0.025, 1e-15);
  EXPECT_NEAR(h.point(h.k_min), -0.005, 1e-15);

  const auto wide = synthesize_grid(odd, 0.03333, 0.100);
  EXPECT_GE(wide.floor_index(0.0) - wide.k_min, 3);
  EXPECT_GE(wide.point(wide.k_min), -0.100 - 0.03333);
}

TEST(Examples, AllocateHandWorked) {
  const std::vector<double> t{0.0, 0.012, 0.020, 0.033};
  const SyntheticGrid g = make_grid(0.01625, 0.011, -0.011, 0.033);
  const auto m = allocate(t, g);
  const double expect[] = {-0.00575, 0.00525, 0.01625, 0.02725};
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(g.point(m.alloc[i]), expect[i], 1e-15);
}

TEST(Examples, OneMissingSampleLeavesOneHole) {
  std::vector<double> t;
  for (int i = 0; i < 20; ++i) {
    if (i != 11) t.push_back(i * 0.01);
  }
  const auto g = make_grid(0.0, 0.01, -0.005, t.back());
  const auto m = allocate(t, g);
  const auto d = detect_drops(m, g);
  ASSERT_EQ(d.count(), 1u);
  EXPECT_EQ(d.dropped_k[0], 11);
}

TEST(Examples, MeanAnchorModeShiftsEvenStreamByHalfStep) {
  // Binary-exact spacing so the mean anchor lands exactly on or between
  // samples; with decimal spacing a one-ulp tie can move the whole chain.
  const double T = 0x1.0p-7;
  DejitterConfig literal;
  literal.refine_period = false;
  literal.align_phase = false;
  literal.delta = 0.0;
  std::vector<double> odd, even;
  for (int i = 0; i < 9; ++i) odd.push_back(i * T);
  for (int i = 0; i < 10; ++i) even.push_back(i * T);
  const auto ro = dejitter(odd, literal);
  for (std::size_t i = 0; i < odd.size(); ++i) EXPECT_EQ(ro.corrected[i], odd[i]);
  literal.delta = T;
  const auto re = dejitter(even, literal);
  for (std::size_t i = 0; i < even.size(); ++i) EXPECT_EQ(re.corrected[i], even[i] - T / 2);
  // default alignment removes the shift, also for decimal spacing
  std::vector<double> dec;
  for (int i = 0; i < 10; ++i) dec.push_back(i * 0.01);
  const auto ra = dejitter(dec);
  EXPECT_TRUE(ra.phase_aligned);
  for (std::size_t i = 0; i < dec.size(); ++i) EXPECT_NEAR(ra.corrected[i], dec[i], 1e-9);
}

TEST(Examples, GapMeanAtLeastPeriod) {
  const auto s = gen_timestamps(4000, {0.02, HalfNormalDelay{0.005}, 0.01, 17});
  const auto r = dejitter(s.timestamps);
  EXPECT_GE(r.after.mean, r.period * (1 - 1e-12));
  EXPECT_GT(r.after.mean, r.period * (1 + 1e-6));  // drops present
}
