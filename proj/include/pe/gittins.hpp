#pragma once

#include <cstddef>
#include <shared_mutex>
#include <span>
#include <unordered_map>

#include "pe/core.hpp"
#include "pe/models.hpp"

namespace pe {

inline constexpr int kGittinsMaxHorizon = 64;

/// Memoized finite-horizon Gittins indices of Beta(a, b) Bernoulli arms.
/// Concurrent lookups are safe; a missing entry may be computed twice by
/// racing threads, which is harmless.
class GittinsTable {
 public:
  explicit GittinsTable(int max_horizon = kGittinsMaxHorizon);

  /// Smallest retirement rate lambda such that collecting lambda for each of
  /// the `remaining` steps is at least as good as playing the arm optimally
  /// with the option to retire. Requires a, b >= 1 and
  /// 1 <= remaining <= max_horizon.
  double index(int a, int b, int remaining);

  /// Same value without touching the memo table.
  [[nodiscard]] double compute(int a, int b, int remaining) const;

  [[nodiscard]] int max_horizon() const { return max_horizon_; }
  [[nodiscard]] std::size_t cached() const;

 private:
  int max_horizon_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::uint64_t, double> memo_;
};

/// Index from a process-wide table.
double gittins_index(int a, int b, int remaining);

/// Argmax over arms of gittins_index(a_i, b_i, T - t + 1), ties uniform.
/// Posterior parameters must be whole numbers (Beta(1, 1) plus counts).
std::size_t gittins_select(std::span<const BetaArmPosterior> arms, int t,
                           int horizon, Rng& rng);

}  // namespace pe
