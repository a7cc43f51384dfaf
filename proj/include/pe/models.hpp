#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pe/core.hpp"

namespace pe {

// ---------------------------------------------------------------------------
// Conjugate arm posteriors
// ---------------------------------------------------------------------------

double sample_beta(double a, double b, Rng& rng);

/// Beta(a, b) posterior for a Bernoulli arm; Beta(1, 1) prior by default.
struct BetaArmPosterior {
  double a = 1.0;
  double b = 1.0;

  [[nodiscard]] bool proper() const { return a > 0.0 && b > 0.0; }
  [[nodiscard]] double mean() const { return a / (a + b); }
  /// Draws a success probability from the posterior.
  double sample_mean(Rng& rng) const;
};

/// Normal-inverse-gamma posterior over (mean, variance) of a Gaussian arm.
/// mean | var ~ N(m, var / kappa), var ~ InvGamma(shape, scale).
/// Default prior: m = 0.5, kappa = 0.01, shape = 2, scale = 0.5.
struct NormalArmPosterior {
  double m = 0.5;
  double kappa = 0.01;
  double shape = 2.0;
  double scale = 0.5;

  [[nodiscard]] bool proper() const {
    return kappa > 0.0 && shape > 0.0 && scale > 0.0;
  }
  [[nodiscard]] double mean() const { return m; }
  /// Draws from the marginal posterior of the mean (location-scale t with
  /// 2 * shape degrees of freedom).
  double sample_mean(Rng& rng) const;
  /// Joint draw of (mean, variance).
  std::pair<double, double> sample_mean_variance(Rng& rng) const;
  /// Posterior mean of the variance, scale / (shape - 1); requires shape > 1.
  [[nodiscard]] double expected_variance() const;
};

/// Beta(a + r, b + 1 - r). Throws PreconditionError unless r is 0 or 1.
BetaArmPosterior update_posterior(BetaArmPosterior p, double reward);
/// Standard normal-inverse-gamma single-observation update.
NormalArmPosterior update_posterior(NormalArmPosterior p, double reward);

// ---------------------------------------------------------------------------
// Least squares
// ---------------------------------------------------------------------------

inline constexpr double kRidgeFallback = 1e-6;

/// Linear fit with coefficient sampling covariance.
struct LinearFit {
  Eigen::VectorXd coef;
  /// Residual variance RSS / (n - rank); NaN when there are no residual
  /// degrees of freedom.
  double sigma2 = 0.0;
  Eigen::MatrixXd cov;
  std::size_t n = 0;
  std::size_t rank = 0;
  bool ridge = false;

  [[nodiscard]] double predict(std::span<const double> x) const;
};

/// Ordinary least squares. For full-rank designs, coef solves the normal
/// equations, sigma2 = RSS / (n - p) and cov = sigma2 (X'X)^{-1}. A
/// rank-deficient design falls back to ridge with `ridge`; the covariance
/// is then the ridge estimator's sampling covariance, which vanishes along
/// unidentified directions. Throws NotIdentifiableError when rows < cols.
LinearFit fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  double ridge = kRidgeFallback);

/// Sufficient statistics for incremental least squares. Unlike fit_ols this
/// also accepts fewer rows than columns (ridge fallback).
class LinearAccumulator {
 public:
  explicit LinearAccumulator(std::size_t dim);

  void add(const Eigen::VectorXd& x, double y);

  [[nodiscard]] std::size_t count() const { return n_; }
  [[nodiscard]] std::size_t dim() const {
    return static_cast<std::size_t>(xty_.size());
  }
  /// Point estimate only.
  [[nodiscard]] Eigen::VectorXd coefficients() const;
  /// Point estimate, residual variance and covariance.
  [[nodiscard]] LinearFit fit() const;

 private:
  Eigen::MatrixXd xtx_;
  Eigen::VectorXd xty_;
  double yty_ = 0.0;
  std::size_t n_ = 0;
};

// ---------------------------------------------------------------------------
// Context distribution
// ---------------------------------------------------------------------------

inline constexpr double kContextCovRegularizer = 1e-8;

struct ContextModelFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Sample mean and (n - 1)-denominator covariance with 1e-8 added to the
/// diagonal. Needs at least two observations.
ContextModelFit fit_context_model(std::span<const Eigen::VectorXd> contexts);

/// Draws from N(mean, cov) for a positive semidefinite cov.
Eigen::VectorXd sample_multivariate_normal(const Eigen::VectorXd& mean,
                                           const Eigen::MatrixXd& cov,
                                           Rng& rng);

}  // namespace pe
