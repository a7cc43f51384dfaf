#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pe/core.hpp"

namespace pe {

// ---------------------------------------------------------------------------
// Multi-armed bandits
// ---------------------------------------------------------------------------

class BernoulliMab {
 public:
  explicit BernoulliMab(std::vector<double> p);

  /// Reward in {0, 1}. Throws std::out_of_range for a bad arm.
  double pull(std::size_t arm, Rng& rng) const;

  [[nodiscard]] std::size_t arms() const { return p_.size(); }
  [[nodiscard]] const std::vector<double>& means() const { return p_; }
  [[nodiscard]] double mean(std::size_t arm) const { return p_.at(arm); }
  [[nodiscard]] double optimal_mean() const { return best_; }

 private:
  std::vector<double> p_;
  double best_;
};

/// Normal rewards with per-arm standard deviations (a common sigma is the
/// usual case; sampled models carry one sigma per arm).
class GaussianMab {
 public:
  GaussianMab(std::vector<double> mu, double sigma);
  GaussianMab(std::vector<double> mu, std::vector<double> sigma);

  double pull(std::size_t arm, Rng& rng) const;

  [[nodiscard]] std::size_t arms() const { return mu_.size(); }
  [[nodiscard]] const std::vector<double>& means() const { return mu_; }
  [[nodiscard]] const std::vector<double>& sigmas() const { return sigma_; }
  [[nodiscard]] double mean(std::size_t arm) const { return mu_.at(arm); }
  [[nodiscard]] double optimal_mean() const { return best_; }

 private:
  std::vector<double> mu_;
  std::vector<double> sigma_;
  double best_;
};

double optimal_mean(const BernoulliMab& env, std::span<const double> = {});
double optimal_mean(const GaussianMab& env, std::span<const double> = {});

// ---------------------------------------------------------------------------
// Two-arm normal-linear contextual bandit
// ---------------------------------------------------------------------------

/// Reward for arm a at context x = (1, z) is x . beta_a + N(0, noise_sd^2);
/// z ~ N(context_mean, context_cov).
class LinearContextualBandit {
 public:
  LinearContextualBandit(std::array<Eigen::VectorXd, 2> beta_per_arm,
                         Eigen::VectorXd context_mean,
                         Eigen::MatrixXd context_cov, double noise_sd);

  /// Draws a full context vector (1, z).
  [[nodiscard]] Eigen::VectorXd draw_context(Rng& rng) const;
  [[nodiscard]] double mean_reward(std::size_t arm,
                                   const Eigen::VectorXd& x) const;
  double pull(std::size_t arm, const Eigen::VectorXd& x, Rng& rng) const;
  [[nodiscard]] std::size_t optimal_arm(const Eigen::VectorXd& x) const;
  [[nodiscard]] double optimal_mean(const Eigen::VectorXd& x) const;

  [[nodiscard]] std::size_t dimension() const {
    return static_cast<std::size_t>(beta_[0].size());
  }
  [[nodiscard]] const std::array<Eigen::VectorXd, 2>& beta_per_arm() const {
    return beta_;
  }
  [[nodiscard]] const Eigen::VectorXd& context_mean() const { return mean_; }
  [[nodiscard]] const Eigen::MatrixXd& context_cov() const { return cov_; }
  [[nodiscard]] double noise_sd() const { return noise_sd_; }

  /// Defaults: d = 3, z ~ N(0, I_2), beta0 = (0.4, 0.2, -0.2),
  /// beta1 = (0.2, 0.5, 0.2), noise_sd = 0.5.
  static LinearContextualBandit defaults();

 private:
  std::array<Eigen::VectorXd, 2> beta_;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd chol_;  // lower Cholesky factor of cov_
  double noise_sd_;
};

/// Per-step optimum max_a x . beta_a. Throws PreconditionError when the
/// context is missing or has the wrong dimension.
double optimal_mean(const LinearContextualBandit& env,
                    std::span<const double> context);

// ---------------------------------------------------------------------------
// Glucose MDP
// ---------------------------------------------------------------------------

/// Lagged patient state. `gl1, di1, ex1` are the most recent observations,
/// `gl2, di2, ex2` the ones before, and `a_prev` the action applied one step
/// before the upcoming decision.
struct GlucoseState {
  double gl1 = 100.0, di1 = 0.0, ex1 = 0.0;
  double gl2 = 100.0, di2 = 0.0, ex2 = 0.0;
  int a_prev = 0;
};

inline constexpr std::size_t kAr2Features = 9;
inline constexpr std::size_t kAr1Features = 5;
inline constexpr std::size_t kLagFeatures = 8;

/// (1, Gl1, Di1, Ex1, Gl2, Di2, Ex2, action, a_prev)
std::array<double, kAr2Features> ar2_features(const GlucoseState& s,
                                              int action);
/// (1, Gl1, Di1, Ex1, action)
std::array<double, kAr1Features> ar1_features(const GlucoseState& s,
                                              int action);
/// (Gl1, Di1, Ex1, Gl2, Di2, Ex2, action, a_prev); no intercept.
std::array<double, kLagFeatures> lag_features(const GlucoseState& s,
                                              int action);

/// Rolls the lags forward after `action` produced glucose `gl` and the new
/// diet/exercise observations.
GlucoseState advance_state(const GlucoseState& s, int action, double gl,
                           double di, double ex);

/// Piecewise-quadratic reward; gl = 70 belongs to the upper branch.
/// Throws PreconditionError for non-finite input.
double glucose_reward(double gl);

struct GlucoseMdp {
  std::array<double, kAr2Features> beta{10.0, 0.9, 0.1,   -0.01, 0.0,
                                        0.1,  -0.01, -10.0, -4.0};
  double glucose_noise_sd = 5.0;
  double covariate_sd = 10.0;
  double covariate_prob = 0.6;
  int n_patients = 15;

  void validate() const;

  /// N(0, covariate_sd^2) with probability covariate_prob, else exactly 0.
  double draw_covariate(Rng& rng) const;
  double draw_diet(Rng& rng) const { return draw_covariate(rng); }
  double draw_exercise(Rng& rng) const { return draw_covariate(rng); }

  /// Both lags at glucose 100, covariates from their marginals, prior
  /// actions 0.
  GlucoseState initial_state(Rng& rng) const;

  [[nodiscard]] double next_glucose_mean(const GlucoseState& s,
                                         int action) const;
  double next_glucose(const GlucoseState& s, int action, Rng& rng) const;
};

struct GlucoseTransition {
  GlucoseState next;
  double glucose = 0.0;
  double reward = 0.0;
};

/// One transition of any glucose dynamics model exposing `next_glucose`,
/// `draw_diet` and `draw_exercise`.
template <class Dynamics>
GlucoseTransition glucose_step(const Dynamics& dyn, const GlucoseState& s,
                               int action, Rng& rng) {
  const double gl = dyn.next_glucose(s, action, rng);
  const double di = dyn.draw_diet(rng);
  const double ex = dyn.draw_exercise(rng);
  GlucoseTransition out;
  out.next = advance_state(s, action, gl, di, ex);
  out.glucose = gl;
  out.reward = std::isfinite(gl) ? glucose_reward(gl)
                                 : std::numeric_limits<double>::quiet_NaN();
  return out;
}

}  // namespace pe
