#include "veltair/metrics.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

namespace veltair {

std::vector<const Query*> measured_queries(const SimResult& result) {
  std::vector<const Query*> out;
  for (const auto& q : result.queries) {
    if (q.arrival_time >= result.window_begin && q.arrival_time < result.window_end) out.push_back(&q);
  }
  return out;
}

namespace {

const std::vector<const Query*> non_empty_window(const SimResult& result) {
  auto qs = measured_queries(result);
  if (qs.empty()) throw std::invalid_argument("no queries in the measured window");
  return qs;
}

bool met(const Query& q) { return q.finish_time && *q.finish_time <= q.deadline; }

const CompiledModel& model_named(const Universe& universe, const std::string& id) {
  for (const auto& m : universe) {
    if (m.adaptive.model_id == id) return m;
  }
  throw ConfigError("unknown model_id '" + id + "'");
}

}  // namespace

double qos_satisfaction(const SimResult& result) {
  const auto qs = non_empty_window(result);
  const auto ok = std::count_if(qs.begin(), qs.end(), [](const Query* q) { return met(*q); });
  return static_cast<double>(ok) / static_cast<double>(qs.size());
}

std::map<std::string, double> qos_satisfaction_per_model(const SimResult& result) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
  for (const Query* q : non_empty_window(result)) {
    auto& c = counts[q->model_id];
    c.first += met(*q) ? 1 : 0;
    ++c.second;
  }
  std::map<std::string, double> out;
  for (const auto& [id, c] : counts) out[id] = static_cast<double>(c.first) / static_cast<double>(c.second);
  return out;
}

double average_latency(const SimResult& result) {
  const auto qs = non_empty_window(result);
  double sum = 0.0;
  for (const Query* q : qs) {
    if (!q->finish_time) throw std::invalid_argument("query " + std::to_string(q->query_id) + " has no finish time");
    sum += to_seconds(*q->finish_time - q->arrival_time);
  }
  return sum / static_cast<double>(qs.size());
}

double block_core_seconds(const BlockTrace& trace) {
  double total = 0.0;
  Nanos t = trace.start;
  int cores = trace.cores;
  for (const auto& u : trace.upgrades) {
    total += cores * to_seconds(u.time - t);
    t = u.time;
    cores = u.cores;
  }
  return total + cores * to_seconds(trace.end - t);
}

int layer_optimal_cores(const LayerSpec& layer, const MachineSpec& machine) {
  const auto& v = layer.variants[choose_variant(layer, 0.0, machine.total_cores, machine)];
  const int need = min_cores_for([&](int c) { return latency(layer, v, c, 0.0, machine); },
                                 to_seconds(layer.qos_budget), machine);
  return std::min(need, machine.total_cores);
}

double cpu_usage_efficiency(const SimResult& result, const Universe& universe) {
  const MachineSpec& machine = result.options.machine;
  const auto strategy = SchedulingStrategy::parse(result.strategy);
  double ideal = 0.0;
  double used = 0.0;
  for (const Query* q : measured_queries(result)) {
    const ModelSpec& view = strategy_view(model_named(universe, q->model_id), strategy);
    for (const auto& b : q->per_block_trace) {
      used += block_core_seconds(b);
      for (std::size_t k = 0; k < b.layers.size(); ++k) {
        const auto& layer = view.layers.at(b.layers.begin + k);
        const double I = k < b.layer_interference.size() ? b.layer_interference[k] : 0.0;
        const int c = layer_optimal_cores(layer, machine);
        ideal += c * latency(layer, layer.variants.at(b.variant_index.at(k)), c, I, machine);
      }
    }
  }
  return used > 0.0 ? ideal / used : 0.0;
}

double conflict_rate(const SimResult& result) {
  if (result.allocation_events == 0) return 0.0;
  return static_cast<double>(result.conflicts.size()) / static_cast<double>(result.allocation_events);
}

double system_load(const SimResult& result) {
  const Nanos lo = result.window_begin;
  const Nanos hi = result.window_end;
  if (hi <= lo) return 0.0;
  double held = 0.0;
  auto add = [&](Nanos a, Nanos b, int cores) {
    const Nanos s = std::max(a, lo);
    const Nanos e = std::min(b, hi);
    if (e > s) held += cores * to_seconds(e - s);
  };
  for (const auto& q : result.queries) {
    for (const auto& b : q.per_block_trace) {
      Nanos t = b.start;
      int cores = b.cores;
      for (const auto& u : b.upgrades) {
        add(t, u.time, cores);
        t = u.time;
        cores = u.cores;
      }
      add(t, b.end, cores);
    }
  }
  return held / (result.options.machine.total_cores * to_seconds(hi - lo));
}

QpsEstimate qps_from_points(std::vector<QpsPoint> points, double target) {
  QpsEstimate est;
  std::sort(points.begin(), points.end(), [](const QpsPoint& a, const QpsPoint& b) { return a.lambda < b.lambda; });
  est.points = points;
  if (points.empty()) return est;
  std::size_t fail = points.size();
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].satisfaction < target) {
      fail = i;
      break;
    }
  }
  if (fail == points.size()) {
    est.unsaturated = true;
    est.lambda_star = est.low = est.high = points.back().lambda;
    return est;
  }
  for (std::size_t i = fail + 1; i < points.size(); ++i) {
    if (points[i].satisfaction >= target) est.non_monotone = true;
  }
  if (fail == 0) {
    est.below_range = true;
    est.lambda_star = est.low = est.high = points.front().lambda;
    return est;
  }
  est.lambda_star = est.low = points[fail - 1].lambda;
  est.high = points[fail].lambda;
  return est;
}

std::vector<double> rate_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) throw std::invalid_argument("invalid rate grid");
  std::vector<double> out;
  for (std::size_t i = 0;; ++i) {
    const double x = lo + static_cast<double>(i) * step;
    if (x > hi + 1e-9) break;
    out.push_back(x);
  }
  return out;
}

QpsEstimate qps_at_95(const std::function<double(double)>& satisfaction_at, const QpsSearch& search) {
  std::vector<QpsPoint> points;
  for (double l : rate_grid(search.lo, search.hi, search.coarse_step)) points.push_back({l, satisfaction_at(l)});
  auto coarse = qps_from_points(points, search.target);
  if (coarse.unsaturated || coarse.below_range || search.fine_step >= search.coarse_step) return coarse;
  for (double l : rate_grid(coarse.low + search.fine_step, coarse.high - 1e-9, search.fine_step)) {
    points.push_back({l, satisfaction_at(l)});
  }
  return qps_from_points(points, search.target);
}

SweepRow summarize_run(const SimResult& result, const Universe& universe, double lambda) {
  SweepRow row;
  row.strategy = result.strategy;
  row.lambda = lambda;
  row.seed = result.seed;
  row.satisfaction = qos_satisfaction(result);
  row.avg_latency_ms = average_latency(result) * 1e3;
  row.efficiency = cpu_usage_efficiency(result, universe);
  row.conflict_rate = conflict_rate(result);
  row.load = system_load(result);
  return row;
}

unsigned sweep_threads() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("VELTAIR_SIM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) n = static_cast<unsigned>(v);
  }
  return n;
}

namespace {

WorkloadSpec cell_workload(const WorkloadSpec& base, double lambda, std::uint64_t seed) {
  auto w = with_total_rate(base, lambda);
  w.rng_seed = seed;
  return w;
}

SimOptions quiet(SimOptions options) {
  options.record_counters = false;
  return options;
}

}  // namespace

double mean_satisfaction(const Universe& universe, const WorkloadSpec& workload, const SchedulingStrategy& strategy,
                         const SimOptions& options, std::span<const std::uint64_t> seeds, double lambda) {
  if (seeds.empty()) throw ConfigError("no seeds given");
  double sum = 0.0;
  for (auto seed : seeds) {
    sum += qos_satisfaction(run(universe, cell_workload(workload, lambda, seed), strategy, quiet(options), seed));
  }
  return sum / static_cast<double>(seeds.size());
}

SweepResult run_sweep(const Universe& universe, const SweepConfig& config) {
  if (config.strategies.empty() || config.lambdas.empty() || config.seeds.empty()) {
    throw ConfigError("sweep grid is empty (need strategies, lambdas and seeds)");
  }
  struct Cell {
    std::size_t s, l, k;
  };
  std::vector<Cell> cells;
  for (std::size_t s = 0; s < config.strategies.size(); ++s)
    for (std::size_t l = 0; l < config.lambdas.size(); ++l)
      for (std::size_t k = 0; k < config.seeds.size(); ++k) cells.push_back({s, l, k});

  // Validate once up front so workers never see config errors.
  resolve_rates(cell_workload(config.workload, config.lambdas.front(), config.seeds.front()), universe);

  SweepResult out;
  out.rows.resize(cells.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(cells.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const auto& c = cells[i];
      try {
        const double lambda = config.lambdas[c.l];
        const auto seed = config.seeds[c.k];
        const auto result = run(universe, cell_workload(config.workload, lambda, seed), config.strategies[c.s],
                                quiet(config.options), seed);
        out.rows[i] = summarize_run(result, universe, lambda);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(cells.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (std::size_t s = 0; s < config.strategies.size(); ++s) {
    std::vector<QpsPoint> points;
    for (std::size_t l = 0; l < config.lambdas.size(); ++l) {
      double sum = 0.0;
      for (std::size_t k = 0; k < config.seeds.size(); ++k) {
        sum += out.rows[(s * config.lambdas.size() + l) * config.seeds.size() + k].satisfaction;
      }
      points.push_back({config.lambdas[l], sum / static_cast<double>(config.seeds.size())});
    }
    out.summaries.push_back({config.strategies[s].name(), qps_from_points(points)});
  }
  return out;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\r\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

namespace {

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

void write_csv(std::ostream& out, const SweepResult& sweep) {
  out << "strategy,lambda,seed,satisfaction,avg_latency_ms,efficiency,conflict_rate,qps95_low,qps95_high\r\n";
  for (const auto& r : sweep.rows) {
    out << csv_field(r.strategy) << ',' << num(r.lambda) << ',' << r.seed << ',' << num(r.satisfaction) << ','
        << num(r.avg_latency_ms) << ',' << num(r.efficiency) << ',' << num(r.conflict_rate) << ",,\r\n";
  }
  for (const auto& s : sweep.summaries) {
    out << csv_field(s.strategy) << ',' << num(s.qps.lambda_star) << ",qps95,,,,," << num(s.qps.low) << ','
        << num(s.qps.high) << "\r\n";
  }
}

}  // namespace veltair
