#include "pe/environments.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pe {

namespace {

void check_arm(std::size_t arm, std::size_t k) {
  if (arm >= k) {
    throw std::out_of_range("arm index " + std::to_string(arm) +
                            " out of range for " + std::to_string(k) +
                            " arms");
  }
}

}  // namespace

BernoulliMab::BernoulliMab(std::vector<double> p) : p_(std::move(p)) {
  if (p_.size() < 2) throw PreconditionError("a bandit needs at least 2 arms");
  for (double v : p_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw PreconditionError("Bernoulli success probability outside [0, 1]");
    }
  }
  best_ = *std::max_element(p_.begin(), p_.end());
}

double BernoulliMab::pull(std::size_t arm, Rng& rng) const {
  check_arm(arm, p_.size());
  return uniform01(rng) < p_[arm] ? 1.0 : 0.0;
}

GaussianMab::GaussianMab(std::vector<double> mu, double sigma)
    : GaussianMab(mu, std::vector<double>(mu.size(), sigma)) {}

GaussianMab::GaussianMab(std::vector<double> mu, std::vector<double> sigma)
    : mu_(std::move(mu)), sigma_(std::move(sigma)) {
  if (mu_.size() < 2) throw PreconditionError("a bandit needs at least 2 arms");
  if (sigma_.size() != mu_.size()) {
    throw PreconditionError("one standard deviation per arm is required");
  }
  for (double s : sigma_) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw PreconditionError("Gaussian arm sigma must be positive");
    }
  }
  for (double m : mu_) {
    if (!std::isfinite(m)) throw PreconditionError("non-finite arm mean");
  }
  best_ = *std::max_element(mu_.begin(), mu_.end());
}

double GaussianMab::pull(std::size_t arm, Rng& rng) const {
  check_arm(arm, mu_.size());
  return mu_[arm] + sigma_[arm] * standard_normal(rng);
}

double optimal_mean(const BernoulliMab& env, std::span<const double>) {
  return env.optimal_mean();
}

double optimal_mean(const GaussianMab& env, std::span<const double>) {
  return env.optimal_mean();
}

LinearContextualBandit::LinearContextualBandit(
    std::array<Eigen::VectorXd, 2> beta_per_arm, Eigen::VectorXd context_mean,
    Eigen::MatrixXd context_cov, double noise_sd)
    : beta_(std::move(beta_per_arm)),
      mean_(std::move(context_mean)),
      cov_(std::move(context_cov)),
      noise_sd_(noise_sd) {
  const auto d = beta_[0].size();
  if (d < 1 || beta_[1].size() != d) {
    throw PreconditionError("both arms need coefficient vectors of equal length");
  }
  if (mean_.size() != d - 1 || cov_.rows() != d - 1 || cov_.cols() != d - 1) {
    throw PreconditionError("context mean/covariance must have dimension d - 1");
  }
  if (!(noise_sd_ > 0.0)) throw PreconditionError("noise_sd must be positive");
  if (d > 1) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov_);
    if (llt.info() != Eigen::Success) {
      throw PreconditionError("context covariance must be positive definite");
    }
    chol_ = llt.matrixL();
  }
}

Eigen::VectorXd LinearContextualBandit::draw_context(Rng& rng) const {
  const auto d = beta_[0].size();
  Eigen::VectorXd x(d);
  x(0) = 1.0;
  if (d > 1) {
    Eigen::VectorXd e(d - 1);
    for (Eigen::Index i = 0; i < d - 1; ++i) e(i) = standard_normal(rng);
    x.tail(d - 1) = mean_ + chol_ * e;
  }
  return x;
}

double LinearContextualBandit::mean_reward(std::size_t arm,
                                           const Eigen::VectorXd& x) const {
  check_arm(arm, 2);
  return x.dot(beta_[arm]);
}

double LinearContextualBandit::pull(std::size_t arm, const Eigen::VectorXd& x,
                                    Rng& rng) const {
  return mean_reward(arm, x) + noise_sd_ * standard_normal(rng);
}

std::size_t LinearContextualBandit::optimal_arm(const Eigen::VectorXd& x) const {
  return mean_reward(1, x) > mean_reward(0, x) ? 1 : 0;
}

double LinearContextualBandit::optimal_mean(const Eigen::VectorXd& x) const {
  return std::max(mean_reward(0, x), mean_reward(1, x));
}

LinearContextualBandit LinearContextualBandit::defaults() {
  Eigen::VectorXd b0(3), b1(3);
  b0 << 0.4, 0.2, -0.2;
  b1 << 0.2, 0.5, 0.2;
  return LinearContextualBandit({b0, b1}, Eigen::VectorXd::Zero(2),
                                Eigen::MatrixXd::Identity(2, 2), 0.5);
}

double optimal_mean(const LinearContextualBandit& env,
                    std::span<const double> context) {
  if (context.size() != env.dimension()) {
    throw PreconditionError("contextual optimum needs a realized context");
  }
  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(
      context.data(), static_cast<Eigen::Index>(context.size()));
  return env.optimal_mean(x);
}

std::array<double, kAr2Features> ar2_features(const GlucoseState& s,
                                              int action) {
  return {1.0,   s.gl1, s.di1, s.ex1, s.gl2, s.di2, s.ex2,
          static_cast<double>(action), static_cast<double>(s.a_prev)};
}

std::array<double, kAr1Features> ar1_features(const GlucoseState& s,
                                              int action) {
  return {1.0, s.gl1, s.di1, s.ex1, static_cast<double>(action)};
}

std::array<double, kLagFeatures> lag_features(const GlucoseState& s,
                                              int action) {
  return {s.gl1, s.di1, s.ex1, s.gl2, s.di2, s.ex2,
          static_cast<double>(action), static_cast<double>(s.a_prev)};
}

GlucoseState advance_state(const GlucoseState& s, int action, double gl,
                           double di, double ex) {
  GlucoseState n;
  n.gl2 = s.gl1;
  n.di2 = s.di1;
  n.ex2 = s.ex1;
  n.gl1 = gl;
  n.di1 = di;
  n.ex1 = ex;
  n.a_prev = action;
  return n;
}

double glucose_reward(double gl) {
  if (!std::isfinite(gl)) throw PreconditionError("glucose must be finite");
  if (gl < 70.0) return -0.005 * gl * gl + 0.95 * gl - 45.0;
  return -0.0002 * gl * gl + 0.022 * gl - 0.5;
}

void GlucoseMdp::validate() const {
  if (!(glucose_noise_sd > 0.0)) {
    throw PreconditionError("glucose_noise_sd must be positive");
  }
  if (!(covariate_prob >= 0.0 && covariate_prob <= 1.0)) {
    throw PreconditionError("covariate_prob must lie in [0, 1]");
  }
  if (!(covariate_sd >= 0.0)) throw PreconditionError("covariate_sd must be >= 0");
  if (n_patients < 1) throw PreconditionError("n_patients must be >= 1");
}

double GlucoseMdp::draw_covariate(Rng& rng) const {
  const double u = uniform01(rng);
  const double z = standard_normal(rng);
  return u < covariate_prob ? covariate_sd * z : 0.0;
}

GlucoseState GlucoseMdp::initial_state(Rng& rng) const {
  GlucoseState s;
  s.gl1 = s.gl2 = 100.0;
  s.di2 = draw_diet(rng);
  s.ex2 = draw_exercise(rng);
  s.di1 = draw_diet(rng);
  s.ex1 = draw_exercise(rng);
  s.a_prev = 0;
  return s;
}

double GlucoseMdp::next_glucose_mean(const GlucoseState& s, int action) const {
  const auto x = ar2_features(s, action);
  double m = 0.0;
  for (std::size_t i = 0; i < kAr2Features; ++i) m += beta[i] * x[i];
  return m;
}

double GlucoseMdp::next_glucose(const GlucoseState& s, int action,
                                Rng& rng) const {
  return next_glucose_mean(s, action) + glucose_noise_sd * standard_normal(rng);
}

}  // namespace pe
