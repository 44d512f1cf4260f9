#include "veltair/proxy.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "veltair/rng.h"

namespace veltair {

namespace {

constexpr double kRidge = 1e-12;

using Mat3 = std::array<std::array<double, 3>, 3>;
using Vec3 = std::array<double, 3>;

// Gaussian elimination with partial pivoting; throws on a singular system.
Vec3 solve3(Mat3 a, Vec3 b) {
  double scale = 0.0;
  for (const auto& row : a)
    for (double v : row) scale = std::max(scale, std::abs(v));
  const double tiny = 1e-10 * std::max(scale, 1e-300);
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (std::abs(a[pivot][col]) <= tiny) throw std::domain_error("rank-deficient");
    std::swap(a[pivot], a[col]);
    std::swap(b[pivot], b[col]);
    for (int r = col + 1; r < 3; ++r) {
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < 3; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  Vec3 x{};
  for (int r = 2; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < 3; ++c) s -= a[r][c] * x[c];
    x[r] = s / a[r][r];
  }
  return x;
}

double raw_prediction(const LinearProxy& p, const CounterSnapshot& s) {
  return p.a0 + p.a1 * s.l3_miss_rate + p.a2 * s.l3_access_rate;
}

}  // namespace

LinearProxy fit(std::span<const ProxyObservation> observations) {
  if (observations.size() < 3) throw std::invalid_argument("need at least 3 observations");
  Mat3 xtx{};
  Vec3 xty{};
  for (const auto& o : observations) {
    const Vec3 row{1.0, o.counters.l3_miss_rate, o.counters.l3_access_rate};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) xtx[i][j] += row[i] * row[j];
      xty[i] += row[i] * o.interference;
    }
  }
  for (int i = 0; i < 3; ++i) xtx[i][i] += kRidge;
  const Vec3 coef = solve3(xtx, xty);

  LinearProxy proxy{coef[0], coef[1], coef[2], 0.0};
  double mean = 0.0;
  for (const auto& o : observations) mean += o.interference;
  mean /= static_cast<double>(observations.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (const auto& o : observations) {
    const double e = o.interference - raw_prediction(proxy, o.counters);
    ss_res += e * e;
    ss_tot += (o.interference - mean) * (o.interference - mean);
  }
  proxy.r2 = ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0;
  return proxy;
}

double predict(const LinearProxy& proxy, const CounterSnapshot& snapshot) {
  return std::clamp(raw_prediction(proxy, snapshot), 0.0, 1.0);
}

double r_squared(const LinearProxy& proxy, std::span<const ProxyObservation> observations) {
  if (observations.empty()) return 0.0;
  double mean = 0.0;
  for (const auto& o : observations) mean += o.interference;
  mean /= static_cast<double>(observations.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (const auto& o : observations) {
    const double e = o.interference - predict(proxy, o.counters);
    ss_res += e * e;
    ss_tot += (o.interference - mean) * (o.interference - mean);
  }
  return ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
}

double mean_absolute_error(const LinearProxy& proxy, std::span<const ProxyObservation> observations) {
  if (observations.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& o : observations) sum += std::abs(o.interference - predict(proxy, o.counters));
  return sum / static_cast<double>(observations.size());
}

std::vector<ProxyObservation> calibration_trace(const Universe& universe, const MachineSpec& machine,
                                                std::size_t count, std::uint64_t seed) {
  if (universe.empty()) throw std::invalid_argument("empty universe");
  Rng rng(seed);
  std::vector<ProxyObservation> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    std::vector<ActiveLoad> active;
    int free = machine.total_cores;
    const auto blocks = rng.integer(0, 6);
    for (std::int64_t b = 0; b < blocks && free > 0; ++b) {
      const auto& model = universe[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(universe.size()) - 1))];
      const auto& spec = rng.uniform() < 0.5 ? model.adaptive : model.baseline;
      const auto& layer = spec.layers[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(spec.layers.size()) - 1))];
      const auto& v = layer.variants[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(layer.variants.size()) - 1))];
      const int cores = static_cast<int>(rng.integer(1, std::min(free, 32)));
      active.push_back({&v, cores});
      free -= cores;
    }
    ProxyObservation obs;
    obs.counters = simulate_counters(active, machine, mix_seed(seed, n), static_cast<double>(n) * 1e-3);
    obs.interference = pressure(active, machine);
    out.push_back(obs);
  }
  return out;
}

}  // namespace veltair
