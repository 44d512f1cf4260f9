#include <gtest/gtest.h>

#include <random>

#include "support.h"
#include "veltair/perfmodel.h"

namespace veltair {
namespace {

using testing::make_variant;

TEST(Speedup, Examples) {
  const auto perfect = make_variant("p", 8, 8, 1e9, 0.0, 1.0);
  EXPECT_DOUBLE_EQ(speedup(perfect, 16), 16.0);
  EXPECT_DOUBLE_EQ(speedup(perfect, 1), 1.0);
  const auto amdahl = make_variant("a", 8, 8, 1e9, 0.1, 1.0);
  EXPECT_DOUBLE_EQ(speedup(amdahl, 1), 1.0);
  EXPECT_NEAR(speedup(amdahl, 64), 64.0 / 7.3, 1e-12);
  EXPECT_NEAR(speedup(amdahl, 64), 8.767, 5e-4);
}

TEST(Speedup, CoresOutOfRange) {
  const auto v = make_variant("p", 8, 8, 1e9, 0.1, 1.0);
  EXPECT_THROW(speedup(v, 0), std::out_of_range);
  EXPECT_THROW(speedup(v, 65), std::out_of_range);
}

TEST(Speedup, NonDecreasingAndConcave) {
  for (double f : {0.0, 0.002, 0.05, 0.3, 0.8, 1.0}) {
    const auto v = make_variant("p", 8, 8, 1e9, f, 1.0);
    for (int c = 2; c < 64; ++c) {
      const double d1 = speedup(v, c) - speedup(v, c - 1);
      const double d2 = speedup(v, c + 1) - speedup(v, c);
      EXPECT_GE(d1, -1e-12);
      EXPECT_LE(d2, d1 + 1e-12);
    }
  }
}

TEST(Slowdown, Examples) {
  const auto v = make_variant("s", 8, 8, 1e9, 0.0, 6.0);
  EXPECT_DOUBLE_EQ(slowdown(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(slowdown(v, 1.0), 7.0);
  EXPECT_DOUBLE_EQ(slowdown(v, 0.5), 4.0);
  EXPECT_THROW(slowdown(v, -0.01), std::out_of_range);
  EXPECT_THROW(slowdown(v, 1.01), std::out_of_range);
}

TEST(Slowdown, CappedAtSeven) {
  const auto v = make_variant("s", 8, 8, 1e9, 0.0, 50.0);
  for (int i = 0; i <= 100; ++i) EXPECT_LE(slowdown(v, i / 100.0), 7.0);
  EXPECT_DOUBLE_EQ(slowdown(v, 1.0), 7.0);
}

TEST(Latency, Examples) {
  const auto v = make_variant("l", 8, 8, 2e9, 0.1, 3.0);
  EXPECT_DOUBLE_EQ(latency(1e9, v, 1, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(latency(2e9, v, 8, 0.4), 2.0 * latency(1e9, v, 8, 0.4));
  EXPECT_DOUBLE_EQ(latency(1e9, v, 8, 0.4), 1e9 / (2e9 * (8.0 / 1.7)) * 2.2);
}

TEST(Latency, ShippedVariantPairCrossesOver) {
  // The smallest- and largest-block versions of a multi-version layer swap
  // order somewhere in (0, 1].
  std::size_t pairs = 0;
  for (const auto& cm : testing::shipped().universe) {
    for (const auto& l : cm.adaptive.layers) {
      if (l.variants.size() < 2) continue;
      const auto& lo = l.variants.front();
      const auto& hi = l.variants.back();
      const int c = 16;
      const bool hi_wins_solo = latency(l, hi, c, 0.0) < latency(l, lo, c, 0.0);
      if (!hi_wins_solo) continue;
      bool swapped = false;
      for (int i = 1; i <= 100 && !swapped; ++i) swapped = latency(l, hi, c, i / 100.0) > latency(l, lo, c, i / 100.0);
      EXPECT_TRUE(swapped) << cm.adaptive.model_id << " layer " << l.layer_id;
      ++pairs;
    }
  }
  EXPECT_GT(pairs, 0u);
}

TEST(Latency, StrictlyMonotoneInCoresAndInterference) {
  const auto v = make_variant("l", 8, 8, 2e9, 0.05, 3.0);
  for (int c = 1; c < 64; ++c) EXPECT_LT(latency(1e9, v, c + 1, 0.3), latency(1e9, v, c, 0.3));
  for (int i = 0; i < 100; ++i) EXPECT_LT(latency(1e9, v, 8, i / 100.0), latency(1e9, v, 8, (i + 1) / 100.0));
}

TEST(Latency, ExactlyOneCrossoverForRandomPairs) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int pairs = 0;
  while (pairs < 300) {
    // a: more sensitive and faster solo; both below the cap on [0, 1].
    const double sa = 1.0 + 5.0 * u(rng);
    const double sb = sa * u(rng);
    const auto a = make_variant("a", 512, 8, 1e9 * (1.0 + u(rng)), 0.02, sa);
    const auto b = make_variant("b", 16, 64, 1e9 * (0.5 + u(rng)), 0.02, sb);
    if (!(latency(1e8, a, 8, 0.0) < latency(1e8, b, 8, 0.0))) continue;
    ++pairs;
    // Analytic crossover of two lines: ta (1 + sa I) = tb (1 + sb I).
    const double ta = latency(1e8, a, 8, 0.0);
    const double tb = latency(1e8, b, 8, 0.0);
    const double star = (tb - ta) / (ta * sa - tb * sb);
    int sign_changes = 0;
    bool prev = latency(1e8, a, 8, 0.0) < latency(1e8, b, 8, 0.0);
    for (int i = 1; i <= 1000; ++i) {
      const double I = i / 1000.0;
      const bool now = latency(1e8, a, 8, I) < latency(1e8, b, 8, I);
      if (now != prev) {
        ++sign_changes;
        EXPECT_NEAR(I, star, 1e-3 + 1e-9);
      }
      prev = now;
    }
    EXPECT_EQ(sign_changes, star > 0.0 && star <= 1.0 ? 1 : 0);
  }
}

LayerSpec layer_with_budget(double ops, double budget) {
  LayerSpec l;
  l.op_count = ops;
  l.qos_budget = from_seconds(budget);
  return l;
}

TEST(MinCoreRequirement, Examples) {
  const auto v = make_variant("m", 8, 8, 1e9, 0.05, 3.0);
  EXPECT_EQ(min_core_requirement(layer_with_budget(5e5, 1e-3), v, 0.0), 1);
  EXPECT_EQ(min_core_requirement(layer_with_budget(1e9, 1e-3), v, 0.0), 65);
}

TEST(MinCoreRequirement, MatchesLinearScanAndIsMonotoneInInterference) {
  const auto v = make_variant("m", 8, 8, 1e9, 0.02, 4.0);
  for (double budget : {2e-3, 5e-3, 1e-2, 3e-2}) {
    const auto l = layer_with_budget(1e8, budget);
    int prev = 0;
    for (int i = 0; i <= 10; ++i) {
      const double I = i / 10.0;
      int scan = 65;
      for (int c = 1; c <= 64; ++c) {
        if (latency(l, v, c, I) <= budget) {
          scan = c;
          break;
        }
      }
      const int r = min_core_requirement(l, v, I);
      EXPECT_EQ(r, scan);
      EXPECT_GE(r, prev);
      prev = r;
    }
  }
}

TEST(Pressure, Examples) {
  EXPECT_EQ(pressure({}), 0.0);
  const auto v = make_variant("p", 8, 8, 1e9, 0.0, 1.0, 1.0);
  const std::vector<ActiveLoad> half{{&v, 32}};
  EXPECT_DOUBLE_EQ(pressure(half), 0.5);
  const std::vector<ActiveLoad> over{{&v, 40}, {&v, 30}};
  EXPECT_THROW(pressure(over), std::invalid_argument);
}

TEST(Pressure, MonotoneAndSaturating) {
  std::mt19937_64 rng(9);
  std::vector<ImplVariant> pool;
  for (int i = 0; i < 8; ++i) pool.push_back(make_variant("v", 8, 8, 1e9, 0.0, 1.0, 0.1 + 0.15 * i));
  for (int t = 0; t < 200; ++t) {
    std::vector<ActiveLoad> active;
    int used = 0;
    double prev = 0.0;
    while (used < 64) {
      const int c = 1 + static_cast<int>(rng() % std::min(16, 64 - used));
      active.push_back({&pool[rng() % pool.size()], c});
      used += c;
      const double p = pressure(active);
      EXPECT_GE(p, prev);
      EXPECT_LE(p, 1.0);
      prev = p;
    }
  }
}

TEST(Counters, EmptySystemReadsZero) {
  const auto s = simulate_counters({}, MachineSpec{}, 1);
  EXPECT_EQ(s.l3_access_rate, 0.0);
  EXPECT_EQ(s.l3_miss_rate, 0.0);
}

TEST(Counters, AccessScalesWithCoresAndNoiseIsBounded) {
  const auto a = make_variant("a", 256, 8, 1e9, 0.0, 1.0, 0.6);
  const auto b = make_variant("b", 32, 64, 1e9, 0.0, 1.0, 0.8);
  const std::vector<ActiveLoad> one{{&a, 8}, {&b, 4}};
  const std::vector<ActiveLoad> two{{&a, 16}, {&b, 8}};
  const double clean = (8 * 0.6 + 4 * 0.8) / 64.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s1 = simulate_counters(one, MachineSpec{}, seed);
    const auto s2 = simulate_counters(two, MachineSpec{}, seed);
    // Same seed, same noise factor: exactly twice the access rate.
    EXPECT_NEAR(s2.l3_access_rate, 2.0 * s1.l3_access_rate, 1e-15);
    EXPECT_LE(std::abs(s1.l3_access_rate / clean - 1.0), 0.02 + 1e-12);
    EXPECT_GE(s1.l3_miss_rate, 0.0);
    EXPECT_LE(s1.l3_miss_rate, 1.0);
    EXPECT_EQ(s1, simulate_counters(one, MachineSpec{}, seed));
  }
}

}  // namespace
}  // namespace veltair
