#include "pe/gittins.hpp"

#include <cmath>
#include <mutex>
#include <vector>

namespace pe {

namespace {

constexpr double kTolerance = 1e-12;

void check_state(int a, int b, int remaining, int max_horizon) {
  if (a < 1 || b < 1) throw PreconditionError("Gittins counts must be >= 1");
  if (remaining < 1 || remaining > max_horizon) {
    throw PreconditionError("remaining horizon outside [1, max_horizon]");
  }
}

// Value of playing once from (a, b) and then acting optimally with the
// retirement option at rate lambda, over r steps in total.
double play_value(int a, int b, int r, double lambda) {
  // v[i] holds the optimal value at depth d with i extra successes among d
  // plays; filled from the leaves (depth r - 1) back to depth 1.
  std::vector<double> v(static_cast<std::size_t>(r) + 1, 0.0);
  for (int d = r - 1; d >= 1; --d) {
    const int left = r - d;
    for (int i = 0; i <= d; ++i) {
      const double aa = a + i;
      const double bb = b + (d - i);
      const double p = aa / (aa + bb);
      const double play = p * (1.0 + v[static_cast<std::size_t>(i) + 1]) +
                          (1.0 - p) * v[static_cast<std::size_t>(i)];
      v[static_cast<std::size_t>(i)] = std::max(lambda * left, play);
    }
  }
  const double p = static_cast<double>(a) / (a + b);
  if (r == 1) return p;
  return p * (1.0 + v[1]) + (1.0 - p) * v[0];
}

}  // namespace

GittinsTable::GittinsTable(int max_horizon) : max_horizon_(max_horizon) {
  if (max_horizon < 1) throw PreconditionError("max_horizon must be >= 1");
}

double GittinsTable::compute(int a, int b, int remaining) const {
  check_state(a, b, remaining, max_horizon_);
  if (remaining == 1) return static_cast<double>(a) / (a + b);
  double lo = 0.0, hi = 1.0;
  while (hi - lo > kTolerance) {
    const double mid = 0.5 * (lo + hi);
    if (mid * remaining >= play_value(a, b, remaining, mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double GittinsTable::index(int a, int b, int remaining) {
  check_state(a, b, remaining, max_horizon_);
  if (a > (1 << 20) || b > (1 << 20)) {
    throw PreconditionError("Gittins counts too large to cache");
  }
  const std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) |
                            (static_cast<std::uint64_t>(b) << 8) |
                            static_cast<std::uint64_t>(remaining);
  {
    std::shared_lock lock(mutex_);
    const auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
  }
  const double value = compute(a, b, remaining);
  std::unique_lock lock(mutex_);
  memo_.emplace(key, value);
  return value;
}

std::size_t GittinsTable::cached() const {
  std::shared_lock lock(mutex_);
  return memo_.size();
}

double gittins_index(int a, int b, int remaining) {
  static GittinsTable table;
  return table.index(a, b, remaining);
}

std::size_t gittins_select(std::span<const BetaArmPosterior> arms, int t,
                           int horizon, Rng& rng) {
  if (arms.empty()) throw PreconditionError("no arms");
  if (t < 1 || t > horizon) throw PreconditionError("step outside [1, T]");
  std::vector<double> idx(arms.size());
  for (std::size_t i = 0; i < arms.size(); ++i) {
    const double a = arms[i].a, b = arms[i].b;
    if (a != std::round(a) || b != std::round(b)) {
      throw PreconditionError("Gittins posteriors need whole-number parameters");
    }
    idx[i] = gittins_index(static_cast<int>(a), static_cast<int>(b),
                           horizon - t + 1);
  }
  return argmax_uniform_ties(idx, rng);
}

}  // namespace pe
