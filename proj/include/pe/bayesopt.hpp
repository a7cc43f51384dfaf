#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pe/core.hpp"

namespace pe {

struct GpOptions {
  std::vector<double> length_scales{0.05, 0.1, 0.2, 0.3, 0.5, 0.8, 1.2, 2.0};
  /// Noise variance as a multiple of the signal variance.
  std::vector<double> noise_ratios{1e-6, 1e-4, 1e-2, 1e-1};
  double jitter = 1e-8;
};

/// Zero-mean GP on standardized targets with an isotropic Matern-5/2
/// kernel. Inputs live in the unit cube.
class GpSurrogate {
 public:
  [[nodiscard]] std::size_t dimension() const {
    return static_cast<std::size_t>(X_.cols());
  }
  [[nodiscard]] std::size_t size() const {
    return static_cast<std::size_t>(X_.rows());
  }
  [[nodiscard]] double length_scale() const { return length_scale_; }
  /// Signal and noise variance in the units of the original targets.
  [[nodiscard]] double signal_variance() const { return signal_ * y_scale_ * y_scale_; }
  [[nodiscard]] double noise_variance() const {
    return noise_ratio_ * signal_variance();
  }
  [[nodiscard]] double prior_mean() const { return y_mean_; }

 private:
  friend GpSurrogate gp_fit(const Eigen::MatrixXd&, std::span<const double>,
                            const GpOptions&);
  friend std::pair<double, double> gp_predict(const GpSurrogate&,
                                              std::span<const double>);

  Eigen::MatrixXd X_;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::VectorXd alpha_;  // K^{-1} y_standardized
  double length_scale_ = 1.0;
  double noise_ratio_ = 0.0;
  double signal_ = 1.0;  // on the standardized scale
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
};

/// Fits the surrogate; rows of X are points in the unit cube. Length scale
/// and noise ratio maximize the marginal likelihood over the option grids,
/// with the signal variance profiled out. Throws PreconditionError unless
/// X has at least two distinct rows.
GpSurrogate gp_fit(const Eigen::MatrixXd& X, std::span<const double> y,
                   const GpOptions& options = {});

/// Posterior mean and latent-function variance at x (in the unit cube).
std::pair<double, double> gp_predict(const GpSurrogate& g,
                                     std::span<const double> x);

/// Expected improvement below `best` (minimization).
double expected_improvement(double mean, double variance, double best);

struct MinimizeOptions {
  int budget = 30;
  int initial_design = 8;
  int candidates = 512;
  int local_candidates = 64;
  double local_step = 0.05;  // in unit-cube coordinates
  GpOptions gp{};
};

struct MinimizeResult {
  std::vector<double> x;
  /// Posterior mean at x.
  double estimated_minimum = 0.0;
  std::vector<std::vector<double>> evaluated_x;
  /// Raw objective values (non-finite values kept as returned).
  std::vector<double> evaluated_y;
};

using Objective = std::function<double(std::span<const double>)>;

/// Sequential EI minimization of a noisy objective over the box
/// [lower, upper]. A coordinate with lower == upper is held fixed. Non-finite
/// objective values enter the surrogate as a penalty above the worst finite
/// value. Returns the evaluated point with the lowest posterior mean.
MinimizeResult minimize(const Objective& objective,
                        std::span<const double> lower,
                        std::span<const double> upper,
                        const MinimizeOptions& options, Rng& rng);

}  // namespace pe
