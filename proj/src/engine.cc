#include "veltair/engine.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <queue>

#include "veltair/rng.h"

namespace veltair {

double WorkloadSpec::total_rate() const {
  double t = 0.0;
  for (const auto& e : entries) t += e.rate;
  return t;
}

WorkloadSpec with_total_rate(WorkloadSpec spec, double total) {
  const double current = spec.total_rate();
  if (!(current > 0.0)) throw ConfigError("workload has no positive rates to scale");
  for (auto& e : spec.entries) e.rate *= total / current;
  return spec;
}

namespace {

std::size_t find_model(const Universe& universe, const std::string& id) {
  for (std::size_t i = 0; i < universe.size(); ++i) {
    if (universe[i].adaptive.model_id == id) return i;
  }
  throw ConfigError("unknown model_id '" + id + "' in workload");
}

}  // namespace

std::vector<double> resolve_rates(const WorkloadSpec& spec, const Universe& universe) {
  if (!(spec.duration > 0.0)) throw ConfigError("workload.duration must be positive");
  std::vector<double> rates;
  std::vector<double> inverse_qos;
  for (const auto& e : spec.entries) {
    const auto& m = universe[find_model(universe, e.model_id)];
    if (!(e.rate > 0.0)) throw ConfigError("workload rate for '" + e.model_id + "' must be positive");
    rates.push_back(e.rate);
    inverse_qos.push_back(1.0 / to_seconds(m.deadline));
  }
  if (spec.mix_mode == MixMode::inverse_qos && !rates.empty()) {
    const double total = spec.total_rate();
    double norm = 0.0;
    for (double w : inverse_qos) norm += w;
    for (std::size_t i = 0; i < rates.size(); ++i) rates[i] = total * inverse_qos[i] / norm;
  }
  return rates;
}

std::vector<Query> generate_arrivals(const WorkloadSpec& spec, const Universe& universe) {
  const auto rates = resolve_rates(spec, universe);
  struct Arrival {
    Nanos time;
    std::size_t entry;
  };
  std::vector<Arrival> all;
  const Nanos horizon = from_seconds(spec.duration);
  for (std::size_t i = 0; i < rates.size(); ++i) {
    Rng rng(mix_seed(spec.rng_seed, i));
    double t = 0.0;
    while (true) {
      t += rng.exponential(rates[i]);
      const Nanos at = from_seconds(t);
      if (at >= horizon) break;
      all.push_back({at, i});
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const Arrival& a, const Arrival& b) {
    return a.time != b.time ? a.time < b.time : a.entry < b.entry;
  });
  std::vector<Query> out;
  out.reserve(all.size());
  for (const auto& a : all) {
    const auto& m = universe[find_model(universe, spec.entries[a.entry].model_id)];
    Query q;
    q.query_id = out.size();
    q.model_id = m.adaptive.model_id;
    q.arrival_time = a.time;
    q.deadline = a.time + m.deadline;
    out.push_back(std::move(q));
  }
  return out;
}

bool event_before(const SimEvent& a, const SimEvent& b) {
  if (a.time != b.time) return a.time < b.time;
  if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
  return a.sequence < b.sequence;
}

const ModelSpec& strategy_view(const CompiledModel& model, const SchedulingStrategy& strategy) {
  return strategy.adaptive_compilation() ? model.adaptive : model.baseline;
}

double isolated_latency(const CompiledModel& model, const SchedulingStrategy& strategy,
                        const MachineSpec& machine) {
  const ModelSpec& view = strategy_view(model, strategy);
  const int avg = view.avg_core;
  const int thres = dynamic_threshold(std::span<const int>(&avg, 1), machine.total_cores)[0];
  double total = 0.0;
  for (std::size_t begin = 0; begin < view.layers.size();) {
    const auto block = plan_block(strategy, view, begin, 0.0, thres, machine);
    total += block_latency(view, block.range, block.variant_index, block.cores, 0.0, machine);
    begin = block.range.end;
  }
  return total;
}

namespace {

struct Task {
  std::size_t query = 0;
  const ModelSpec* view = nullptr;
  std::size_t next_layer = 0;
  bool pending_conflict = false;  // a start attempt already found too few cores
};

struct Active {
  std::size_t task = 0;
  PlannedBlock plan;
  std::size_t trace = 0;  // index into the query's per_block_trace
  int requested = 0;
  int cores = 0;
  std::size_t layer = 0;  // model layer currently running
  Nanos seg_start = 0;
  double remaining = 1.0;  // fraction of the current layer left at seg_start
  double layer_interference = 0.0;
  Nanos layer_end = 0;
  Nanos start = 0;
  Nanos predicted_end = 0;
  std::uint64_t generation = 0;
};

struct EventAfter {
  bool operator()(const SimEvent& a, const SimEvent& b) const { return event_before(b, a); }
};

class Simulation {
 public:
  Simulation(const Universe& universe, const WorkloadSpec& workload, std::vector<Query> queries,
             const SchedulingStrategy& strategy, const SimOptions& options, std::uint64_t seed)
      : universe_(universe), strategy_(strategy), options_(options), machine_(options.machine), seed_(seed) {
    result_.strategy = strategy.name();
    result_.seed = seed;
    result_.workload = workload;
    result_.options = options;
    result_.queries = std::move(queries);
    const Nanos horizon = from_seconds(workload.duration);
    horizon_ = horizon;
    result_.window_begin = static_cast<Nanos>(std::llround(static_cast<double>(horizon) * options.warmup_fraction));
    result_.window_end = horizon - result_.window_begin;
    free_ = machine_.total_cores;
    for (const auto& q : result_.queries) {
      model_index_.push_back(find_model(universe, q.model_id));
    }
  }

  SimResult run() {
    for (std::size_t q = 0; q < result_.queries.size(); ++q) {
      push({result_.queries[q].arrival_time, EventKind::arrival, q, 0, 0});
    }
    if (options_.record_counters && options_.sample_period > 0) push({0, EventKind::counter_sample, 0, 0, 0});
    while (!events_.empty()) {
      const SimEvent ev = events_.top();
      events_.pop();
      now_ = ev.time;
      switch (ev.kind) {
        case EventKind::finish: on_finish(ev); break;
        case EventKind::arrival: on_arrival(ev.payload); break;
        case EventKind::counter_sample: on_sample(); break;
      }
      check_conservation();
      result_.end_time = now_;
    }
    for (const auto& q : result_.queries) {
      if (!q.finish_time) throw SimulationError("query " + std::to_string(q.query_id) + " never finished");
    }
    return std::move(result_);
  }

 private:
  void push(SimEvent ev) {
    ev.sequence = sequence_++;
    events_.push(ev);
  }

  std::vector<ActiveLoad> loads(std::optional<std::size_t> skip, bool drop_soon_to_finish) const {
    std::vector<ActiveLoad> out;
    for (std::size_t i = 0; i < active_.size(); ++i) {
      if (!active_[i] || (skip && *skip == i)) continue;
      const auto& a = *active_[i];
      if (drop_soon_to_finish && soon_to_finish(a.start, a.predicted_end, now_)) continue;
      const auto& layer = tasks_[a.task]->view->layers[a.layer];
      out.push_back({&layer.variants[a.plan.variant_index[a.layer - a.plan.range.begin]], a.cores});
    }
    return out;
  }

  double true_interference(std::optional<std::size_t> skip) const {
    const auto l = loads(skip, false);
    return pressure(l, machine_);
  }

  double observed_interference() {
    const auto l = loads(std::nullopt, true);
    const auto tag = observations_++;
    // Nothing else running: the counters read zero and there is nothing to predict.
    if (l.empty()) return 0.0;
    const auto snap = simulate_counters(l, machine_, mix_seed(seed_ ^ 0x0b5e7ULL, tag), to_seconds(now_));
    return predict(options_.proxy, snap);
  }

  int threshold_for(std::size_t task) const {
    std::vector<int> avgs;
    std::size_t mine = 0;
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      if (!tasks_[i]) continue;
      if (i == task) mine = avgs.size();
      avgs.push_back(tasks_[i]->view->avg_core);
    }
    return dynamic_threshold(avgs, machine_.total_cores)[mine];
  }

  const ImplVariant& variant_of(const Active& a) const {
    const auto& layer = tasks_[a.task]->view->layers[a.layer];
    return layer.variants[a.plan.variant_index[a.layer - a.plan.range.begin]];
  }

  double layer_seconds(const Active& a, int cores) const {
    return latency(tasks_[a.task]->view->layers[a.layer], variant_of(a), cores, a.layer_interference, machine_);
  }

  void schedule_layer_end(std::size_t slot) {
    auto& a = *active_[slot];
    a.layer_end = a.seg_start + from_seconds(a.remaining * layer_seconds(a, a.cores));
    a.generation = ++generations_;
    push({a.layer_end, EventKind::finish, slot, a.generation, 0});
  }

  void begin_layer(std::size_t slot, Nanos at) {
    auto& a = *active_[slot];
    a.layer_interference = true_interference(slot);
    a.seg_start = at;
    a.remaining = 1.0;
    trace_of(a).layer_interference.push_back(a.layer_interference);
    schedule_layer_end(slot);
  }

  BlockTrace& trace_of(const Active& a) {
    return result_.queries[tasks_[a.task]->query].per_block_trace[a.trace];
  }

  std::size_t new_slot() {
    for (std::size_t i = 0; i < active_.size(); ++i) {
      if (!active_[i]) return i;
    }
    active_.emplace_back();
    return active_.size() - 1;
  }

  bool conflict_forced() {
    if (!options_.conflict.forced_rate) return false;
    const double r = *options_.conflict.forced_rate;
    const auto k = static_cast<double>(result_.allocation_events);
    return std::floor((k + 1.0) * r) > std::floor(k * r);
  }

  // Returns false when the task has to wait for cores.
  bool start_block(std::size_t task_id) {
    auto& task = *tasks_[task_id];
    const double observed = strategy_.interference_aware() ? observed_interference() : 0.0;
    const int thres = strategy_.adaptive_scheduling() ? threshold_for(task_id) : 0;
    PlannedBlock plan = plan_block(strategy_, *task.view, task.next_layer, observed, thres, machine_);
    plan.planned_interference = observed;
    const int requested = std::min(plan.cores, machine_.total_cores);

    if (free_ == 0) {
      task.pending_conflict = true;
      return false;
    }
    const std::uint64_t key = mix_seed(seed_ ^ 0xc0f1ULL, result_.allocation_events);
    ConflictOutcome outcome = apply_conflict(requested, free_, options_.conflict, key);
    if (!outcome.conflicted && (task.pending_conflict || conflict_forced())) {
      ConflictModel deterministic = options_.conflict;
      outcome = apply_conflict(requested + 1, requested, deterministic, key);
      outcome.granted = requested;
    }
    task.pending_conflict = false;
    ++result_.allocation_events;

    auto& query = result_.queries[task.query];
    BlockTrace trace;
    trace.layers = plan.range;
    trace.variant_index = plan.variant_index;
    trace.start = now_;
    trace.requested_cores = requested;
    trace.cores = outcome.granted;
    trace.planned_interference = observed;
    trace.overhead = outcome.overhead;
    trace.conflicted = outcome.conflicted;
    trace.overflow = plan.overflow;
    query.per_block_trace.push_back(std::move(trace));
    if (outcome.conflicted) {
      result_.conflicts.push_back({now_, query.query_id, query.per_block_trace.size() - 1, requested,
                                   outcome.granted, outcome.overhead});
    }

    const std::size_t slot = new_slot();
    Active a;
    a.task = task_id;
    a.plan = std::move(plan);
    a.trace = query.per_block_trace.size() - 1;
    a.requested = requested;
    a.cores = outcome.granted;
    a.layer = a.plan.range.begin;
    a.start = now_;
    a.predicted_end = now_ + outcome.overhead +
                      from_seconds(block_latency(*task.view, a.plan.range, a.plan.variant_index, a.cores,
                                                 observed, machine_));
    active_[slot] = std::move(a);
    free_ -= outcome.granted;
    query.per_block_trace.back().interference_at_start = true_interference(slot);
    if (outcome.granted < requested) upgrade_queue_.push_back(slot);
    begin_layer(slot, now_ + outcome.overhead);
    return true;
  }

  void upgrade(std::size_t slot) {
    auto& a = *active_[slot];
    const int extra = std::min(a.requested - a.cores, free_);
    if (extra <= 0) return;
    if (now_ > a.seg_start) {
      a.remaining = std::max(0.0, a.remaining - to_seconds(now_ - a.seg_start) / layer_seconds(a, a.cores));
      a.seg_start = now_;
    }
    a.cores += extra;
    free_ -= extra;
    trace_of(a).upgrades.push_back({now_, a.cores, a.layer});
    schedule_layer_end(slot);
  }

  void on_finish(const SimEvent& ev) {
    if (ev.payload >= active_.size() || !active_[ev.payload] || active_[ev.payload]->generation != ev.generation) {
      return;  // superseded by a re-pricing
    }
    const std::size_t slot = ev.payload;
    auto& a = *active_[slot];
    trace_of(a).layer_end.push_back(now_);
    ++a.layer;
    if (a.layer < a.plan.range.end) {
      begin_layer(slot, now_);
      return;
    }
    trace_of(a).end = now_;
    const std::size_t task_id = a.task;
    free_ += a.cores;
    auto& task = *tasks_[task_id];
    task.next_layer = a.plan.range.end;
    active_[slot].reset();
    std::erase(upgrade_queue_, slot);

    std::optional<std::size_t> continuing;
    if (task.next_layer >= task.view->layers.size()) {
      result_.queries[task.query].finish_time = now_;
      tasks_[task_id].reset();
    } else {
      continuing = task_id;
    }
    on_release(continuing);
  }

  void on_release(std::optional<std::size_t> continuing) {
    if (continuing && !start_block(*continuing)) stalled_.push_back(*continuing);
    for (auto it = upgrade_queue_.begin(); it != upgrade_queue_.end() && free_ > 0;) {
      upgrade(*it);
      const auto& a = *active_[*it];
      it = a.cores >= a.requested ? upgrade_queue_.erase(it) : std::next(it);
    }
    while (!stalled_.empty() && free_ > 0) {
      const std::size_t t = stalled_.front();
      stalled_.pop_front();
      start_block(t);
    }
    admit();
  }

  void on_arrival(std::size_t query) {
    waiting_.push_back(query);
    admit();
  }

  void admit() {
    while (!waiting_.empty() && stalled_.empty()) {
      const std::size_t q = waiting_.front();
      const ModelSpec& view = strategy_view(universe_[model_index_[q]], strategy_);
      if (free_ < view.avg_core) return;
      waiting_.pop_front();
      std::size_t id = tasks_.size();
      for (std::size_t i = 0; i < tasks_.size(); ++i) {
        if (!tasks_[i]) {
          id = i;
          break;
        }
      }
      if (id == tasks_.size()) tasks_.emplace_back();
      tasks_[id] = Task{q, &view, 0, false};
      if (!start_block(id)) stalled_.push_back(id);
    }
  }

  void on_sample() {
    const auto l = loads(std::nullopt, false);
    CounterRecord rec;
    rec.snapshot = simulate_counters(l, machine_, mix_seed(seed_ ^ 0x5a3b1eULL, samples_++), to_seconds(now_));
    rec.interference = pressure(l, machine_);
    result_.counters.push_back(rec);
    const bool busy = !waiting_.empty() || std::any_of(tasks_.begin(), tasks_.end(), [](const auto& t) { return t.has_value(); });
    const Nanos next = now_ + options_.sample_period;
    if (next <= horizon_ || busy) push({next, EventKind::counter_sample, 0, 0, 0});
  }

  void check_conservation() const {
    int used = 0;
    for (const auto& a : active_) {
      if (!a) continue;
      if (a->cores < 1 || a->cores > a->requested) {
        throw SimulationError("block holds " + std::to_string(a->cores) + " cores (requested " +
                              std::to_string(a->requested) + ")");
      }
      used += a->cores;
    }
    if (free_ < 0 || used + free_ != machine_.total_cores) {
      throw SimulationError("core accounting broken at t=" + std::to_string(now_) + "ns: " +
                            std::to_string(used) + " allocated + " + std::to_string(free_) + " free != " +
                            std::to_string(machine_.total_cores));
    }
  }

  const Universe& universe_;
  SchedulingStrategy strategy_;
  SimOptions options_;
  MachineSpec machine_;
  std::uint64_t seed_;
  SimResult result_;
  std::vector<std::size_t> model_index_;
  Nanos horizon_ = 0;
  Nanos now_ = 0;
  int free_ = 0;
  std::uint64_t sequence_ = 0;
  std::uint64_t generations_ = 0;  // unique across slots, so reused slots never match old events
  std::uint64_t observations_ = 0;
  std::uint64_t samples_ = 0;
  std::priority_queue<SimEvent, std::vector<SimEvent>, EventAfter> events_;
  std::vector<std::optional<Task>> tasks_;
  std::vector<std::optional<Active>> active_;
  std::deque<std::size_t> waiting_;
  std::deque<std::size_t> stalled_;
  std::vector<std::size_t> upgrade_queue_;
};

}  // namespace

namespace {

void check_fits(const Universe& universe, const SchedulingStrategy& strategy, const SimOptions& options) {
  if (options.machine.total_cores < 1) throw ConfigError("machine.total_cores must be >= 1");
  for (const auto& m : universe) {
    if (strategy_view(m, strategy).avg_core > options.machine.total_cores) {
      throw ConfigError("model '" + m.adaptive.model_id + "' needs more cores than the machine has");
    }
  }
}

}  // namespace

SimResult run(const Universe& universe, const WorkloadSpec& workload, const SchedulingStrategy& strategy,
              const SimOptions& options, std::uint64_t seed) {
  check_fits(universe, strategy, options);
  Simulation sim(universe, workload, generate_arrivals(workload, universe), strategy, options, seed);
  return sim.run();
}

SimResult run_arrivals(const Universe& universe, std::span<const PlacedArrival> arrivals, double duration,
                       const SchedulingStrategy& strategy, const SimOptions& options, std::uint64_t seed) {
  check_fits(universe, strategy, options);
  if (!(duration > 0.0)) throw ConfigError("duration must be positive");
  std::vector<std::size_t> order(arrivals.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return arrivals[a].time < arrivals[b].time; });
  std::vector<Query> queries;
  for (auto i : order) {
    if (arrivals[i].time < 0) throw ConfigError("arrival times must be >= 0");
    const auto& m = universe[find_model(universe, arrivals[i].model_id)];
    Query q;
    q.query_id = queries.size();
    q.model_id = m.adaptive.model_id;
    q.arrival_time = arrivals[i].time;
    q.deadline = q.arrival_time + m.deadline;
    queries.push_back(std::move(q));
  }
  WorkloadSpec workload;
  workload.duration = duration;
  workload.rng_seed = seed;
  Simulation sim(universe, workload, std::move(queries), strategy, options, seed);
  return sim.run();
}

}  // namespace veltair
