#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "support.h"
#include "veltair/engine.h"
#include "veltair/io.h"

namespace veltair {
namespace {

using testing::shipped;
using testing::shipped_model;

WorkloadSpec mix(double total_rate, double duration, std::uint64_t seed = 1) {
  WorkloadSpec w;
  for (const auto& m : shipped().universe) w.entries.push_back({m.adaptive.model_id, 1.0});
  w.mix_mode = MixMode::inverse_qos;
  w = with_total_rate(w, total_rate);
  w.duration = duration;
  w.rng_seed = seed;
  return w;
}

TEST(Arrivals, PoissonCountIsWithinThreeSigma) {
  WorkloadSpec w;
  w.entries = {{"ResNet-50", 100.0}};
  w.duration = 10.0;
  w.rng_seed = 42;
  const auto q = generate_arrivals(w, shipped().universe);
  EXPECT_GE(q.size(), 905u);
  EXPECT_LE(q.size(), 1095u);
}

TEST(Arrivals, DeterministicSortedAndNumbered) {
  const auto w = mix(500, 1.0, 9);
  const auto a = generate_arrivals(w, shipped().universe);
  EXPECT_EQ(a, generate_arrivals(w, shipped().universe));
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].query_id, i);
    if (i > 0) EXPECT_LE(a[i - 1].arrival_time, a[i].arrival_time);
    EXPECT_EQ(a[i].deadline - a[i].arrival_time, shipped_model(a[i].model_id).deadline);
    EXPECT_LT(a[i].arrival_time, from_seconds(1.0));
  }
  auto other = w;
  other.rng_seed = 10;
  EXPECT_NE(a, generate_arrivals(other, shipped().universe));
}

TEST(Arrivals, InverseQosSplitsByDeadline) {
  WorkloadSpec w;
  w.entries = {{"EfficientNet", 1.0}, {"SSD", 1.0}};
  w.mix_mode = MixMode::inverse_qos;
  const auto r = resolve_rates(w, shipped().universe);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_NEAR(r[0] / r[1], 10.0, 1e-12);
  EXPECT_NEAR(r[0] + r[1], 2.0, 1e-12);
  w.mix_mode = MixMode::explicit_rates;
  EXPECT_EQ(resolve_rates(w, shipped().universe), (std::vector<double>{1.0, 1.0}));
}

TEST(Arrivals, InvalidWorkloads) {
  WorkloadSpec w;
  w.entries = {{"NoSuchNet", 1.0}};
  EXPECT_THROW(resolve_rates(w, shipped().universe), ConfigError);
  w.entries = {{"SSD", -1.0}};
  EXPECT_THROW(resolve_rates(w, shipped().universe), ConfigError);
  w.entries = {{"SSD", 1.0}};
  w.duration = 0.0;
  EXPECT_THROW(resolve_rates(w, shipped().universe), ConfigError);
}

TEST(Run, UnknownModelFailsBeforeSimulating) {
  WorkloadSpec w;
  w.entries = {{"NoSuchNet", 10.0}};
  EXPECT_THROW(run(shipped().universe, w, SchedulingStrategy{}, shipped().options, 1), ConfigError);
}

TEST(Run, EmptyWorkload) {
  WorkloadSpec w;
  w.duration = 0.5;
  const auto r = run(shipped().universe, w, SchedulingStrategy{}, shipped().options, 1);
  EXPECT_TRUE(r.queries.empty());
  EXPECT_TRUE(r.conflicts.empty());
  EXPECT_LE(r.end_time, from_seconds(0.5));
}

TEST(Run, SameSeedSameBytes) {
  auto o = shipped().options;
  o.record_counters = true;
  const auto w = mix(500, 0.2, 3);
  const auto a = run(shipped().universe, w, SchedulingStrategy{}, o, 11);
  const auto b = run(shipped().universe, w, SchedulingStrategy{}, o, 11);
  EXPECT_EQ(dump(Json(a)), dump(Json(b)));
}

TEST(Run, SingleQueryMatchesIsolatedLatency) {
  for (const auto* name : {"veltair_full", "veltair_as", "layer_wise", "model_wise"}) {
    const auto strategy = SchedulingStrategy::parse(name);
    for (const auto& cm : shipped().universe) {
      const std::vector<PlacedArrival> one{{cm.adaptive.model_id, 0}};
      const auto r = run_arrivals(shipped().universe, one, 1.0, strategy, shipped().options, 1);
      ASSERT_EQ(r.queries.size(), 1u);
      ASSERT_TRUE(r.queries[0].finish_time.has_value());
      const double observed = to_seconds(*r.queries[0].finish_time - r.queries[0].arrival_time);
      const double isolated = isolated_latency(cm, strategy, MachineSpec{});
      EXPECT_NEAR(observed / isolated, 1.0, 0.01) << name << " " << cm.adaptive.model_id;
      EXPECT_TRUE(r.conflicts.empty());
    }
  }
}

// Independent re-pricing of every layer from the recorded trace.
void expect_replay_matches(const SimResult& r, const SchedulingStrategy& strategy) {
  const MachineSpec machine = r.options.machine;
  for (const auto& q : r.queries) {
    const auto& view = strategy_view(shipped_model(q.model_id), strategy);
    for (const auto& t : q.per_block_trace) {
      int cores = t.cores;
      std::size_t next_upgrade = 0;
      ASSERT_EQ(t.layer_end.size(), t.layers.end - t.layers.begin);
      for (std::size_t i = 0; i < t.layer_end.size(); ++i) {
        const std::size_t layer_id = t.layers.begin + i;
        const auto& layer = view.layers[layer_id];
        const auto& variant = layer.variants[t.variant_index[i]];
        const double I = t.layer_interference[i];
        Nanos seg = i == 0 ? t.start + t.overhead : t.layer_end[i - 1];
        double remaining = 1.0;
        while (next_upgrade < t.upgrades.size() && t.upgrades[next_upgrade].layer == layer_id) {
          const auto& u = t.upgrades[next_upgrade++];
          if (u.time > seg) {
            remaining = std::max(0.0, remaining - to_seconds(u.time - seg) / latency(layer, variant, cores, I, machine));
            seg = u.time;
          }
          cores = u.cores;
        }
        EXPECT_EQ(seg + from_seconds(remaining * latency(layer, variant, cores, I, machine)), t.layer_end[i])
            << "query " << q.query_id << " layer " << layer_id;
      }
      EXPECT_EQ(next_upgrade, t.upgrades.size());
      EXPECT_EQ(t.end, t.layer_end.back());
    }
  }
}

void expect_causal(const SimResult& r) {
  for (const auto& q : r.queries) {
    ASSERT_TRUE(q.finish_time.has_value()) << q.query_id;
    ASSERT_FALSE(q.per_block_trace.empty());
    EXPECT_GE(q.per_block_trace.front().start, q.arrival_time);
    EXPECT_EQ(q.per_block_trace.front().layers.begin, 0u);
    for (std::size_t b = 1; b < q.per_block_trace.size(); ++b) {
      EXPECT_GE(q.per_block_trace[b].start, q.per_block_trace[b - 1].end);
      EXPECT_EQ(q.per_block_trace[b].layers.begin, q.per_block_trace[b - 1].layers.end);
    }
    EXPECT_EQ(q.per_block_trace.back().layers.end, shipped_model(q.model_id).adaptive.layers.size());
    EXPECT_EQ(*q.finish_time, q.per_block_trace.back().end);
    for (const auto& t : q.per_block_trace) {
      EXPECT_LE(t.start + t.overhead, t.layer_end.front());
      EXPECT_TRUE(std::is_sorted(t.layer_end.begin(), t.layer_end.end()));
      EXPECT_LE(t.cores, t.requested_cores);
      for (const auto& u : t.upgrades) {
        EXPECT_GE(u.time, t.start);
        EXPECT_LE(u.cores, t.requested_cores);
      }
    }
  }
}

// Core occupancy rebuilt from the traces never exceeds the machine.
void expect_conservation(const SimResult& r) {
  std::map<Nanos, std::vector<int>> deltas;
  for (const auto& q : r.queries) {
    for (const auto& t : q.per_block_trace) {
      int held = t.cores;
      deltas[t.start].push_back(t.cores);
      for (const auto& u : t.upgrades) {
        deltas[u.time].push_back(u.cores - held);
        held = u.cores;
      }
      deltas[t.end].push_back(-held);
    }
  }
  int used = 0;
  for (auto& [time, d] : deltas) {
    // Releases at an instant happen before grants at that instant.
    std::sort(d.begin(), d.end());
    for (int x : d) {
      used += x;
      ASSERT_GE(used, 0) << "at " << time;
      ASSERT_LE(used, r.options.machine.total_cores) << "at " << time;
    }
  }
  EXPECT_EQ(used, 0);
}

TEST(Run, TracesReplayConserveAndStayCausal) {
  for (const auto* name : {"veltair_full", "veltair_as", "veltair_ac", "layer_wise", "fixed_block(6)", "model_wise"}) {
    const auto strategy = SchedulingStrategy::parse(name);
    for (double lambda : {200.0, 900.0}) {
      const auto r = run(shipped().universe, mix(lambda, 0.3, 4), strategy, shipped().options, 21);
      SCOPED_TRACE(std::string(name) + " @" + std::to_string(lambda));
      expect_causal(r);
      expect_conservation(r);
      expect_replay_matches(r, strategy);
      EXPECT_EQ(r.strategy, strategy.name());
    }
  }
}

TEST(Run, ForcedConflictsProceedAtFullAllocation) {
  auto o = shipped().options;
  o.conflict.forced_rate = 0.25;
  const auto r = run(shipped().universe, mix(150, 0.3, 2), SchedulingStrategy::parse("layer_wise"), o, 3);
  std::size_t conflicted = 0;
  for (const auto& q : r.queries) {
    for (const auto& t : q.per_block_trace) {
      if (!t.conflicted) continue;
      ++conflicted;
      EXPECT_EQ(t.overhead, o.conflict.per_conflict_overhead);
    }
  }
  EXPECT_EQ(conflicted, r.conflicts.size());
  EXPECT_GE(conflicted, r.allocation_events / 4);
  expect_replay_matches(r, SchedulingStrategy::parse("layer_wise"));
}

TEST(Events, TotalOrder) {
  const SimEvent finish{10, EventKind::finish, 0, 0, 5};
  const SimEvent arrival{10, EventKind::arrival, 0, 0, 1};
  const SimEvent sample{10, EventKind::counter_sample, 0, 0, 0};
  const SimEvent earlier{9, EventKind::counter_sample, 0, 0, 9};
  EXPECT_TRUE(event_before(finish, arrival));
  EXPECT_TRUE(event_before(arrival, sample));
  EXPECT_TRUE(event_before(earlier, finish));
  EXPECT_FALSE(event_before(arrival, finish));
  const SimEvent a1{10, EventKind::arrival, 0, 0, 2};
  EXPECT_TRUE(event_before(arrival, a1));
  EXPECT_FALSE(event_before(a1, a1));
}

TEST(StrategyView, BaselinesRunTheSingleVersionModel) {
  const auto& cm = shipped_model("ResNet-50");
  EXPECT_EQ(&strategy_view(cm, SchedulingStrategy::parse("veltair_full")), &cm.adaptive);
  EXPECT_EQ(&strategy_view(cm, SchedulingStrategy::parse("veltair_ac")), &cm.adaptive);
  EXPECT_EQ(&strategy_view(cm, SchedulingStrategy::parse("veltair_as")), &cm.baseline);
  for (const auto& l : cm.baseline.layers) EXPECT_EQ(l.variants.size(), 1u);
}

}  // namespace
}  // namespace veltair
