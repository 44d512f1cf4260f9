#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "support.h"
#include "veltair/compiler.h"

namespace veltair {
namespace {

using testing::make_variant;

struct Pt {
  std::int64_t block_size;
  std::int64_t parallelism;
  bool operator==(const Pt&) const = default;
};

std::vector<Pt> brute_force_front(const std::vector<Pt>& s) {
  std::vector<Pt> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (j != i && s[j].block_size >= s[i].block_size && s[j].parallelism >= s[i].parallelism) dominated = true;
    }
    if (!dominated) out.push_back(s[i]);
  }
  std::sort(out.begin(), out.end(), [](const Pt& a, const Pt& b) { return a.block_size < b.block_size; });
  return out;
}

std::vector<Pt> random_points(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<std::int64_t> coord(1, 64);
  std::set<std::pair<std::int64_t, std::int64_t>> seen;
  std::vector<Pt> out;
  while (out.size() < n) {
    Pt p{coord(rng), coord(rng)};
    if (seen.emplace(p.block_size, p.parallelism).second) out.push_back(p);
  }
  return out;
}

ModelSpec ops_model(std::vector<double> ops, double qos) {
  ModelSpec m;
  m.qos = from_seconds(qos);
  for (std::size_t i = 0; i < ops.size(); ++i) {
    LayerSpec l;
    l.layer_id = i;
    l.op_count = ops[i];
    m.layers.push_back(l);
  }
  return m;
}

TEST(ApportionQos, ProportionalToOps) {
  const auto m = apportion_qos(ops_model({2e9, 1e9, 1e9}, 0.015));
  EXPECT_EQ(m.layers[0].qos_budget, 7'500'000);
  EXPECT_EQ(m.layers[1].qos_budget, 3'750'000);
  EXPECT_EQ(m.layers[2].qos_budget, 3'750'000);
}

TEST(ApportionQos, SingleLayerGetsEverything) {
  EXPECT_EQ(apportion_qos(ops_model({5e8}, 0.010)).layers[0].qos_budget, 10'000'000);
}

TEST(ApportionQos, ResNetStandInSumsToFifteenMillisecondsExactly) {
  const auto& p = testing::shipped().profiles.models.front();
  ASSERT_EQ(p.model_id, "ResNet-50");
  std::vector<double> ops;
  for (const auto& l : p.layers) ops.push_back(l.op_count);
  const auto m = apportion_qos(ops_model(ops, p.qos_seconds));
  Nanos sum = 0;
  for (const auto& l : m.layers) {
    EXPECT_GT(l.qos_budget, 0);
    sum += l.qos_budget;
  }
  EXPECT_EQ(sum, 15'000'000);
}

TEST(ApportionQos, RejectsNonPositiveOps) {
  EXPECT_THROW(apportion_qos(ops_model({1e9, 0.0}, 0.01)), std::invalid_argument);
  EXPECT_THROW(apportion_qos(ops_model({1e9, -1.0}, 0.01)), std::invalid_argument);
}

TEST(ApportionQos, BudgetsSumExactlyForRandomModels) {
  std::mt19937_64 rng(5);
  std::lognormal_distribution<double> op(20.0, 2.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> ops(1 + rng() % 80);
    for (auto& o : ops) o = op(rng);
    const auto m = apportion_qos(ops_model(ops, 0.001 * (1 + rng() % 200)));
    Nanos sum = 0;
    for (const auto& l : m.layers) sum += l.qos_budget;
    EXPECT_EQ(sum, m.qos);
  }
}

TEST(FilterByQos, ThresholdAndOrder) {
  std::vector<ScheduleSample> s(3);
  s[0].solo_time = 0.001;
  s[1].solo_time = 0.002;
  s[2].solo_time = 0.003;
  const auto kept = filter_by_qos(s, 0.002);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0], s[0]);
  EXPECT_EQ(kept[1], s[1]);
  EXPECT_TRUE(filter_by_qos(s, 0.0005).empty());
}

TEST(FilterByQos, MedianBudgetKeepsAboutHalf) {
  const auto s = generate_samples(7, 1e9, 1024, 42);
  std::vector<double> t;
  for (const auto& x : s) t.push_back(x.solo_time);
  std::nth_element(t.begin(), t.begin() + 512, t.end());
  const double median = t[512];
  std::size_t direct = 0;
  for (const auto& x : s) direct += x.solo_time <= median ? 1 : 0;
  const auto kept = filter_by_qos(s, median);
  EXPECT_EQ(kept.size(), direct);
  EXPECT_GE(kept.size(), 400u);
  EXPECT_LE(kept.size(), 624u);
}

TEST(ExtractDominant, WorkedExample) {
  const std::vector<Pt> s{{4, 16}, {8, 8}, {2, 8}};
  EXPECT_EQ(extract_dominant(s), (std::vector<Pt>{{4, 16}, {8, 8}}));
  EXPECT_EQ(extract_dominant(s), brute_force_front(s));
}

TEST(ExtractDominant, SingletonIsItself) {
  const std::vector<Pt> s{{3, 3}};
  EXPECT_EQ(extract_dominant(s), s);
}

TEST(ExtractDominant, TiesInOneCoordinateKeepOnlyTheLargerOther) {
  // (4,2) is weakly dominated by (4,5); both share block_size 4.
  const std::vector<Pt> s{{4, 2}, {4, 5}, {1, 9}};
  EXPECT_EQ(extract_dominant(s), brute_force_front(s));
}

TEST(ExtractDominant, MatchesBruteForceOn1000Seeds) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    std::mt19937_64 rng(seed);
    const auto s = random_points(rng, 1 + rng() % 200);
    ASSERT_EQ(extract_dominant(s), brute_force_front(s)) << "seed " << seed;
  }
}

TEST(ExtractDominant, IdempotentAntichainSortedNonEmpty) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(seed + 77);
    const auto s = random_points(rng, 1 + rng() % 150);
    const auto f = extract_dominant(s);
    ASSERT_FALSE(f.empty());
    EXPECT_EQ(extract_dominant(f), f);
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (i > 0) EXPECT_LT(f[i - 1].block_size, f[i].block_size);
      for (std::size_t j = 0; j < f.size(); ++j) {
        if (i != j) EXPECT_FALSE(f[j].block_size >= f[i].block_size && f[j].parallelism >= f[i].parallelism);
      }
    }
  }
}

TEST(SelectVersions, StrideArithmetic) {
  EXPECT_EQ(stride_indices(20, 5), (std::vector<std::size_t>{0, 4, 8, 12, 16}));
  EXPECT_EQ(stride_indices(3, 5), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(stride_indices(7, 5), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(stride_indices(1, 1), (std::vector<std::size_t>{0}));
  EXPECT_THROW(stride_indices(4, 0), std::invalid_argument);
}

TEST(SelectVersions, MonotoneAndKeepsSmallestBlock) {
  for (std::size_t n = 1; n < 60; ++n) {
    std::vector<Pt> d;
    for (std::size_t i = 0; i < n; ++i) d.push_back({static_cast<std::int64_t>(i + 1), static_cast<std::int64_t>(n - i)});
    for (std::size_t v = 1; v <= 8; ++v) {
      const auto s = select_versions(d, v);
      ASSERT_FALSE(s.empty());
      EXPECT_LE(s.size(), v);
      EXPECT_EQ(s.front(), d.front());
      for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LT(s[i - 1].block_size, s[i].block_size);
      if (n <= v) EXPECT_EQ(s, d);
    }
  }
}

SurfaceProbe probe_for(double ops) {
  SurfaceProbe p;
  p.op_count = ops;
  return p;
}

TEST(PruneRedundant, DuplicateIsRemoved) {
  const auto v = make_variant("a", 64, 8, 2e9, 0.01, 3.0);
  auto w = v;
  w.variant_id = "b";
  const std::vector<ImplVariant> both{v, w};
  EXPECT_EQ(prune_redundant(both, probe_for(1e8)).size(), 1u);
}

TEST(PruneRedundant, SingleVersionStays) {
  const std::vector<ImplVariant> one{make_variant("a", 64, 8, 2e9, 0.01, 3.0)};
  EXPECT_EQ(prune_redundant(one, probe_for(1e8)), one);
}

TEST(PruneRedundant, KeepsCrossingVersions) {
  // Tolerant but slow vs fast but sensitive: each wins somewhere by > 10%.
  const std::vector<ImplVariant> two{make_variant("tol", 8, 64, 1e9, 0.01, 0.2),
                                     make_variant("fast", 1024, 8, 2e9, 0.01, 6.0)};
  auto p = probe_for(1e8);
  p.levels = interference_levels_with_solo();
  EXPECT_EQ(prune_redundant(two, p).size(), 2u);
}

TEST(PruneRedundant, ShippedLayersMostlyKeepAtMostThree) {
  std::size_t layers = 0;
  std::size_t le3 = 0;
  for (const auto& m : testing::shipped().universe) {
    for (const auto& l : m.adaptive.layers) {
      ++layers;
      le3 += l.variants.size() <= 3 ? 1 : 0;
      EXPECT_LE(l.variants.size(), 5u);
    }
  }
  EXPECT_GE(static_cast<double>(le3), 0.5 * static_cast<double>(layers));
}

TEST(SelectVersions, BestFiveOfTenStayWithinTenPercent) {
  std::size_t checked = 0;
  const auto& s = testing::shipped();
  for (const auto& cm : s.universe) {
    for (std::size_t li = 0; li < cm.info.size(); ++li) {
      const auto& d = cm.info[li].dominant;
      if (d.size() < 10) continue;
      const auto ten = select_versions(d, 10);
      const auto losses = nested_envelope_losses(ten, probe_for(cm.adaptive.layers[li].op_count));
      EXPECT_LE(losses[4], 0.10) << cm.adaptive.model_id << " layer " << li;
      ++checked;
    }
  }
  EXPECT_GT(checked, 0u);
}

TEST(SelectVersions, StridedFiveOfTenMostlyWithinTenPercent) {
  // The stride pick is not the best subset; a few layers lose slightly more.
  std::size_t checked = 0;
  std::size_t within = 0;
  const auto& s = testing::shipped();
  for (const auto& cm : s.universe) {
    for (std::size_t li = 0; li < cm.info.size(); ++li) {
      const auto& d = cm.info[li].dominant;
      if (d.size() < 10) continue;
      const auto ten = select_versions(d, 10);
      const auto five = select_versions(ten, 5);
      const double loss = envelope_loss(five, ten, probe_for(cm.adaptive.layers[li].op_count));
      EXPECT_LE(loss, 0.25) << cm.adaptive.model_id << " layer " << li;
      within += loss <= 0.10 ? 1 : 0;
      ++checked;
    }
  }
  ASSERT_GT(checked, 0u);
  EXPECT_GE(static_cast<double>(within), 0.95 * static_cast<double>(checked));
}

TEST(Envelope, LossIsMonotoneInVersionsAndZeroAtFullSet) {
  const auto& s = testing::shipped();
  for (std::size_t mi = 0; mi < s.universe.size(); ++mi) {
    const auto& cm = s.universe[mi];
    for (std::size_t li = 0; li < cm.info.size(); ++li) {
      const auto losses = nested_envelope_losses(cm.info[li].dominant, probe_for(cm.adaptive.layers[li].op_count));
      ASSERT_EQ(losses.size(), cm.info[li].dominant.size());
      EXPECT_EQ(losses.back(), 0.0);
      for (std::size_t k = 1; k < losses.size(); ++k) EXPECT_LE(losses[k], losses[k - 1]);
    }
  }
}

TEST(Envelope, IsBelowEveryCurve) {
  const std::vector<ImplVariant> vs{make_variant("a", 8, 64, 1e9, 0.01, 0.2),
                                    make_variant("b", 128, 16, 1.6e9, 0.02, 2.0),
                                    make_variant("c", 1024, 8, 2e9, 0.05, 6.0)};
  const auto p = probe_for(1e8);
  const auto env = latency_envelope(vs, p);
  for (std::size_t k = 0; k < p.levels.size(); ++k) {
    double best = 1e300;
    for (const auto& v : vs) best = std::min(best, latency(p.op_count, v, p.cores, p.levels[k]));
    EXPECT_EQ(env[k], best);
  }
}

TEST(CompileModel, OneVersionIsTheFastestSolo) {
  const auto& prof = testing::shipped().profiles;
  CompileOptions o;
  o.versions = 1;
  const auto cm = compile_model(prof.models[0], o, prof.config.params, prof.config.machine);
  for (std::size_t li = 0; li < cm.adaptive.layers.size(); ++li) {
    const auto& l = cm.adaptive.layers[li];
    ASSERT_EQ(l.variants.size(), 1u);
    const double budget = to_seconds(l.qos_budget);
    double best = 1e300;
    for (const auto& s : prof.models[0].layers[li].samples) {
      if (s.solo_time <= budget) best = std::min(best, s.solo_time);
    }
    const auto& chosen = l.variants[0];
    const double t = latency(l.op_count, chosen, prof.config.params.reference_cores, 0.0, prof.config.machine);
    EXPECT_DOUBLE_EQ(t, best);
  }
}

TEST(CompileModel, ManyVersionsSelectTheWholeDominantSet) {
  const auto& prof = testing::shipped().profiles;
  CompileOptions o;
  o.versions = 10000;
  const auto cm = compile_model(prof.models[5], o, prof.config.params, prof.config.machine);
  for (const auto& info : cm.info) EXPECT_EQ(info.stride_selected, info.dominant);
}

TEST(CompileModel, InfeasibleLayerKeepsItsFastestSampleAndIsFlagged) {
  auto prof = testing::shipped().profiles.models[5];
  prof.qos_seconds = 1e-7;
  const auto& cfg = testing::shipped().profiles.config;
  const auto cm = compile_model(prof, CompileOptions{}, cfg.params, cfg.machine);
  for (std::size_t li = 0; li < cm.info.size(); ++li) {
    EXPECT_TRUE(cm.info[li].qos_infeasible_solo);
    ASSERT_EQ(cm.info[li].dominant.size(), 1u);
    double best = 1e300;
    for (const auto& s : prof.layers[li].samples) best = std::min(best, s.solo_time);
    EXPECT_DOUBLE_EQ(latency(prof.layers[li].op_count, cm.info[li].dominant[0], cfg.params.reference_cores, 0.0,
                             cfg.machine),
                     best);
  }
  EXPECT_TRUE(cm.avg_core_clamped);
}

TEST(CompileModel, VariantsSortedByBlockSize) {
  for (const auto& cm : testing::shipped().universe) {
    for (const auto& l : cm.adaptive.layers) {
      for (std::size_t i = 1; i < l.variants.size(); ++i) EXPECT_LT(l.variants[i - 1].block_size, l.variants[i].block_size);
    }
  }
}

}  // namespace
}  // namespace veltair
