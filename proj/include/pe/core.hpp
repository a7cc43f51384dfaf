#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pe {

using Rng = std::mt19937_64;

/// Thrown when an operation is called outside its documented domain.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a fit does not have enough data to identify its parameters.
class NotIdentifiableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Counter-based seed derivation. The same (base, tags...) always yields the
// same child seed, independent of how many other streams were derived.
std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> tags);

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline std::size_t uniform_index(std::size_t n, Rng& rng) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

/// Index of the maximum score; exact ties are broken uniformly at random.
/// The generator is consumed only when a tie actually occurs.
std::size_t argmax_uniform_ties(std::span<const double> scores, Rng& rng);

/// Pairwise summation in fixed index order.
double pairwise_sum(std::span<const double> values);

/// One decision step: optional context/state features, the action and the
/// observed reward.
struct HistoryRecord {
  int step = 0;
  std::vector<double> context;
  std::size_t action = 0;
  double reward = 0.0;
};

/// Append-only record of an episode. Steps must strictly increase.
class History {
 public:
  void append(HistoryRecord record);
  [[nodiscard]] const std::vector<HistoryRecord>& records() const {
    return records_;
  }
  [[nodiscard]] std::size_t size() const { return records_.size(); }
  [[nodiscard]] bool empty() const { return records_.empty(); }

 private:
  std::vector<HistoryRecord> records_;
};

/// Realized cumulative regret sum_t (mu*_t - U^t). The environment must
/// provide `optimal_mean(env, context)`; for multi-armed bandits the context
/// is ignored.
template <class Environment>
double cumulative_regret(const History& history, const Environment& env) {
  double total = 0.0;
  for (const auto& rec : history.records()) {
    total += optimal_mean(env, std::span<const double>(rec.context)) -
             rec.reward;
  }
  return total;
}

/// One logged row of an episode. `unit` distinguishes patients in cohort
/// problems and is 0 for bandits.
struct StepLog {
  int step = 0;
  int unit = 0;
  std::size_t action = 0;
  double reward = 0.0;
  double eta = 0.0;
  std::optional<std::array<double, 3>> theta;
  double cumulative = 0.0;
};

struct EpisodeRecord {
  std::string variant;
  int replicate = 0;
  std::uint64_t seed = 0;
  std::vector<StepLog> steps;
  /// Loop steps only (initial pulls excluded); empty for cohort problems.
  History history;
  /// Cumulative realized regret (bandits) or cumulative reward (MDP).
  double cumulative = 0.0;
  /// Cumulative pseudo-regret sum_t (mu* - mu_{A^t}); NaN for the MDP.
  double pseudo_regret = std::numeric_limits<double>::quiet_NaN();
  /// Steps at which a requested estimator fell back to a simpler one.
  std::vector<int> estimator_fallback_steps;
};

}  // namespace pe
