#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "pe/core.hpp"
#include "pe/forest.hpp"

namespace pe {

struct NpOptions {
  ForestOptions forest{};
  int cv_folds = 5;
  /// Points per bandwidth grid axis (covariate and residual multipliers).
  int grid_points = 8;
  double grid_min = 0.25;
  double grid_max = 4.0;
};

/// Two-step conditional density of a response given covariates: a forest
/// conditional mean plus a kernel conditional density of the residuals.
class NpConditionalFit {
 public:
  static constexpr std::size_t kMinTransitions = 50;

  /// Assembles a fit from parts. `residuals` has one entry per row of
  /// `covariates`. A covariate bandwidth of +inf drops that feature from the
  /// kernel; a residual bandwidth of 0 disables jitter.
  NpConditionalFit(RegressionForest mean, Table covariates,
                   std::vector<double> residuals,
                   std::vector<double> covariate_bandwidths,
                   double residual_bandwidth);

  [[nodiscard]] double predict(std::span<const double> x) const;

  /// Prediction plus a residual resampled with covariate-kernel weights
  /// plus N(0, h_r^2) jitter.
  double sample(std::span<const double> x, Rng& rng) const;

  /// Normalized kernel weights of the stored rows at x.
  [[nodiscard]] std::vector<double> weights(std::span<const double> x) const;

  [[nodiscard]] const std::vector<double>& residuals() const {
    return *residuals_;
  }
  [[nodiscard]] const std::vector<double>& covariate_bandwidths() const {
    return hx_;
  }
  [[nodiscard]] double residual_bandwidth() const { return hr_; }
  [[nodiscard]] std::size_t size() const { return residuals_->size(); }

 private:
  std::shared_ptr<const RegressionForest> mean_;
  std::shared_ptr<const Table> covariates_;
  std::shared_ptr<const std::vector<double>> residuals_;
  std::vector<double> hx_;
  double hr_;
};

/// Fits the forest mean (out-of-bag residuals, globally centered) and picks
/// covariate and residual bandwidths as multiples of a normal-reference rule
/// by k-fold likelihood cross-validation of the conditional density.
/// Throws NotIdentifiableError below kMinTransitions rows.
NpConditionalFit fit_np_conditional(const Table& X, std::span<const double> y,
                                    const NpOptions& options, Rng& rng);

double np_sample_next_glucose(const NpConditionalFit& fit,
                              std::span<const double> features, Rng& rng);

}  // namespace pe
