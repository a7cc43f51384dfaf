#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pe/core.hpp"
#include "pe/environments.hpp"
#include "pe/forest.hpp"
#include "pe/models.hpp"
#include "pe/np_conditional.hpp"

namespace pe {

// Every confidence model exposes
//   Model sample_model(Rng&) const;   a draw M~ from the confidence distribution
//   Model point_model() const;        the point estimate M^
// and `using Model = ...`.

/// Degenerate confidence distribution on a single model.
template <class M>
struct PointMass {
  using Model = M;
  M model;

  Model sample_model(Rng&) const { return model; }
  [[nodiscard]] Model point_model() const { return model; }
};

struct BernoulliConfidence {
  using Model = BernoulliMab;
  std::vector<BetaArmPosterior> arms;

  Model sample_model(Rng& rng) const;
  [[nodiscard]] Model point_model() const;
};

/// Per-arm normal-inverse-gamma posteriors. Sampled models carry one
/// standard deviation per arm; the point model uses the posterior mean of
/// each variance.
struct GaussianConfidence {
  using Model = GaussianMab;
  std::vector<NormalArmPosterior> arms;

  Model sample_model(Rng& rng) const;
  [[nodiscard]] Model point_model() const;
};

/// Per-arm least-squares fits plus a multivariate normal context model.
struct ContextualConfidence {
  using Model = LinearContextualBandit;
  std::array<LinearFit, 2> arms;
  ContextModelFit context;  // over z, without the intercept
  double noise_sd = 1.0;

  Model sample_model(Rng& rng) const;
  [[nodiscard]] Model point_model() const;
};

/// Builds the contextual confidence model. `contexts` holds every observed
/// z (no intercept). The noise sd is pooled over arms, or 1 when no residual
/// degrees of freedom exist yet.
ContextualConfidence make_contextual_confidence(
    const std::array<LinearAccumulator, 2>& arms,
    std::span<const Eigen::VectorXd> contexts);

// ---------------------------------------------------------------------------
// Glucose dynamics
// ---------------------------------------------------------------------------

enum class GlucoseEstimator { Ar2Linear, Ar1Linear, Ar2Np };

std::string_view to_string(GlucoseEstimator e);
GlucoseEstimator parse_glucose_estimator(std::string_view name);

/// Estimated glucose dynamics; usable with glucose_step.
struct GlucoseModel {
  GlucoseEstimator kind = GlucoseEstimator::Ar2Linear;
  Eigen::VectorXd coef;  // linear kinds
  double sigma = 0.0;    // linear kinds
  std::shared_ptr<const NpConditionalFit> np;
  std::shared_ptr<const std::vector<double>> diet;
  std::shared_ptr<const std::vector<double>> exercise;
  int n_patients = 15;

  double next_glucose(const GlucoseState& s, int action, Rng& rng) const;
  double draw_diet(Rng& rng) const;
  double draw_exercise(Rng& rng) const;
  /// Glucose lags at 100, covariates resampled, prior actions 0.
  GlucoseState initial_state(Rng& rng) const;
};

/// One observed transition of the cohort.
struct GlucoseObservation {
  GlucoseState state;
  int action = 0;
  double glucose = 0.0;
  double diet = 0.0;
  double exercise = 0.0;
};

struct GlucoseConfidence {
  using Model = GlucoseModel;
  GlucoseEstimator requested = GlucoseEstimator::Ar2Linear;
  /// Estimator actually fitted; differs from `requested` when the
  /// nonparametric fit lacked data.
  GlucoseEstimator used = GlucoseEstimator::Ar2Linear;
  LinearFit linear;
  std::shared_ptr<const NpConditionalFit> np;
  std::shared_ptr<const std::vector<double>> diet;
  std::shared_ptr<const std::vector<double>> exercise;
  int n_patients = 15;

  /// Linear kinds: beta~ ~ N(beta^, cov) with sigma^ fixed. The
  /// nonparametric fit is used as a point mass.
  Model sample_model(Rng& rng) const;
  [[nodiscard]] Model point_model() const;
  [[nodiscard]] bool fell_back() const { return used != requested; }
};

/// Fits the requested estimator on pooled transitions. The nonparametric
/// estimator falls back to AR(2) least squares below
/// NpConditionalFit::kMinTransitions. Throws NotIdentifiableError when even
/// the linear fit is not identifiable.
GlucoseConfidence fit_glucose_confidence(
    std::span<const GlucoseObservation> data, GlucoseEstimator estimator,
    const NpOptions& np_options, Rng& rng);

}  // namespace pe
