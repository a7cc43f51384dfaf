#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pe/core.hpp"
#include "pe/environments.hpp"

namespace pe {

/// Running per-arm count, mean and sum of squared deviations (Welford).
class ArmStats {
 public:
  explicit ArmStats(std::size_t arms);

  void update(std::size_t arm, double reward);

  [[nodiscard]] std::size_t arms() const { return n_.size(); }
  [[nodiscard]] std::size_t count(std::size_t arm) const { return n_.at(arm); }
  /// Requires count(arm) >= 1.
  [[nodiscard]] double mean(std::size_t arm) const;
  /// Sample variance (n - 1 denominator); requires count(arm) >= 2.
  [[nodiscard]] double variance(std::size_t arm) const;
  [[nodiscard]] const std::vector<double>& means() const { return mean_; }

 private:
  std::vector<std::size_t> n_;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

enum class PolicyKind { EpsilonGreedy, Ucb, Thompson, Gittins };

std::string_view to_string(PolicyKind kind);
PolicyKind parse_policy_kind(std::string_view name);

/// Fixed-formula baselines indexed by the step t >= 1.
enum class Formula {
  HalfInverseT,  // 0.5 / t
  InverseT,      // 1 / t
  PowerDecay,    // 0.8^t
  UcbRamp,       // 0.5 - 0.45 / t
};

std::string_view to_string(Formula f);
Formula parse_formula(std::string_view name);
double formula_value(Formula f, int t);

/// Where a variant's exploration parameter comes from at each step.
struct ParameterSource {
  enum class Kind { Fixed, FromFormula, Tuned };
  Kind kind = Kind::Fixed;
  double value = 0.0;
  Formula formula = Formula::InverseT;

  static ParameterSource fixed(double v) { return {Kind::Fixed, v, {}}; }
  static ParameterSource from_formula(Formula f) {
    return {Kind::FromFormula, 0.0, f};
  }
  static ParameterSource tuned() { return {Kind::Tuned, 0.0, {}}; }

  /// Native parameter at step t for fixed and formula sources.
  [[nodiscard]] double untuned_value(int t) const;
};

inline constexpr double kUcbAlphaFloor = 1e-4;

/// Maps a schedule output eta in [0, 1] onto the decision rule's own
/// parameter: epsilon = eta, tau = eta, alpha = max(0.5 (1 - eta), floor).
/// Larger eta always means more exploration.
double native_parameter(PolicyKind kind, double eta);

// ---------------------------------------------------------------------------
// Decision rules
// ---------------------------------------------------------------------------

/// Greedy arm (argmax of sample means, ties uniform) with probability
/// 1 - eps + eps/k, every other arm with probability eps/k.
std::size_t epsilon_greedy_select(const ArmStats& stats, double epsilon,
                                  Rng& rng);

/// Standard normal quantile z_{1 - alpha}.
double ucb_quantile(double alpha);

/// Argmax of mean_i + z_{1-alpha} s_i / sqrt(n_i); arms with fewer than two
/// pulls get an infinite bound. Requires alpha in (0, 0.5].
std::size_t ucb_select(const ArmStats& stats, double alpha, Rng& rng);
/// Same rule with the quantile precomputed.
std::size_t ucb_select_z(const ArmStats& stats, double z, Rng& rng);

/// Argmax of omega_i + tau (draw_i - omega_i).
std::size_t ts_select_from_draws(std::span<const double> omega,
                                 std::span<const double> draws, double tau,
                                 Rng& rng);

/// Generalized Thompson sampling. `Confidence` exposes `mean()` and
/// `sample_mean(rng)`.
template <class Confidence>
std::size_t ts_select(std::span<const Confidence> confidence, double tau,
                      Rng& rng) {
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw PreconditionError("tau must lie in [0, 1]");
  }
  thread_local std::vector<double> omega, draws;
  omega.resize(confidence.size());
  draws.resize(confidence.size());
  for (std::size_t i = 0; i < confidence.size(); ++i) {
    omega[i] = confidence[i].mean();
    if (!std::isfinite(omega[i])) {
      throw PreconditionError("confidence distribution without a finite mean");
    }
    draws[i] = confidence[i].sample_mean(rng);
  }
  return ts_select_from_draws(omega, draws, tau, rng);
}

/// Argmax over arms of x . coef_arm, ties uniform.
std::size_t contextual_greedy(std::span<const Eigen::VectorXd> coefficients,
                              const Eigen::VectorXd& x, Rng& rng);

/// Argmax over a in {0, 1} of the estimated one-step reward; ties go to 0.
/// `Estimator` exposes `predict(const GlucoseState&, int action)`.
template <class Estimator>
int mdp_greedy(const Estimator& q, const GlucoseState& s) {
  return q.predict(s, 1) > q.predict(s, 0) ? 1 : 0;
}

}  // namespace pe
