#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "support.h"
#include "veltair/proxy.h"

namespace veltair {
namespace {

ProxyObservation obs(double miss, double access, double interference) {
  ProxyObservation o;
  o.counters.l3_miss_rate = miss;
  o.counters.l3_access_rate = access;
  o.interference = interference;
  return o;
}

std::vector<ProxyObservation> exact_linear(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ProxyObservation> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = u(rng);
    const double a = u(rng);
    out.push_back(obs(m, a, 0.2 + 0.5 * m + 0.3 * a));
  }
  return out;
}

TEST(Fit, RecoversExactLinearData) {
  const auto data = exact_linear(200, 1);
  const auto p = fit(data);
  EXPECT_NEAR(p.a0, 0.2, 1e-9);
  EXPECT_NEAR(p.a1, 0.5, 1e-9);
  EXPECT_NEAR(p.a2, 0.3, 1e-9);
  EXPECT_NEAR(p.r2, 1.0, 1e-12);
}

TEST(Fit, NeedsThreeObservations) {
  const std::vector<ProxyObservation> two{obs(0.1, 0.2, 0.3), obs(0.4, 0.5, 0.6)};
  EXPECT_THROW(fit(two), std::invalid_argument);
}

TEST(Fit, RankDeficientDesign) {
  // Miss rate identical to access rate: the two columns are collinear.
  std::vector<ProxyObservation> data;
  for (int i = 0; i < 10; ++i) data.push_back(obs(i / 10.0, i / 10.0, i / 20.0));
  try {
    fit(data);
    FAIL();
  } catch (const std::domain_error& e) {
    EXPECT_STREQ(e.what(), "rank-deficient");
  }
}

TEST(Fit, InvariantUnderReordering) {
  auto data = calibration_trace(testing::shipped().universe, MachineSpec{}, 500, 3);
  const auto a = fit(data);
  std::mt19937_64 rng(4);
  std::shuffle(data.begin(), data.end(), rng);
  const auto b = fit(data);
  EXPECT_NEAR(a.a0, b.a0, 1e-9);
  EXPECT_NEAR(a.a1, b.a1, 1e-9);
  EXPECT_NEAR(a.a2, b.a2, 1e-9);
}

TEST(Fit, SimulatorTraceIsExplainedByTheCounters) {
  const auto& u = testing::shipped().universe;
  const auto train = calibration_trace(u, MachineSpec{}, 10000, 7);
  const auto p = fit(train);
  EXPECT_GE(p.r2, 0.95);
  const auto held_out = calibration_trace(u, MachineSpec{}, 10000, 8);
  EXPECT_GE(r_squared(p, held_out), 0.95);
  EXPECT_LE(mean_absolute_error(p, held_out), 0.05);
}

TEST(CalibrationTrace, DeterministicAndInRange) {
  const auto& u = testing::shipped().universe;
  const auto a = calibration_trace(u, MachineSpec{}, 300, 11);
  EXPECT_EQ(a, calibration_trace(u, MachineSpec{}, 300, 11));
  ASSERT_EQ(a.size(), 300u);
  for (const auto& o : a) {
    EXPECT_GE(o.interference, 0.0);
    EXPECT_LE(o.interference, 1.0);
  }
}

TEST(Predict, Examples) {
  const LinearProxy zero_intercept{0.0, 0.7, 0.4, 1.0};
  EXPECT_EQ(predict(zero_intercept, CounterSnapshot{}), 0.0);
  CounterSnapshot hot;
  hot.l3_miss_rate = 1.0;
  hot.l3_access_rate = 1.0;
  EXPECT_EQ(predict(zero_intercept, hot), 1.0);
  const LinearProxy negative{-0.5, 0.1, 0.1, 1.0};
  EXPECT_EQ(predict(negative, CounterSnapshot{}), 0.0);
}

TEST(Predict, MonotoneForPositiveCoefficients) {
  const LinearProxy p{0.05, 0.6, 0.8, 1.0};
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    CounterSnapshot a;
    a.l3_miss_rate = u(rng);
    a.l3_access_rate = u(rng);
    CounterSnapshot b = a;
    b.l3_miss_rate = std::min(1.0, a.l3_miss_rate + u(rng) * 0.2);
    b.l3_access_rate += u(rng) * 0.2;
    EXPECT_LE(predict(p, a), predict(p, b));
    EXPECT_GE(predict(p, a), 0.0);
    EXPECT_LE(predict(p, b), 1.0);
  }
}

}  // namespace
}  // namespace veltair
