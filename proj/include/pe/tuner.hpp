#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pe/bayesopt.hpp"
#include "pe/confidence.hpp"
#include "pe/core.hpp"
#include "pe/environments.hpp"
#include "pe/forest.hpp"
#include "pe/models.hpp"
#include "pe/policies.hpp"
#include "pe/schedule.hpp"

namespace pe {

enum class TuningVariant { ConfidenceAveraged, PointEstimate };
enum class RolloutMode { FullHorizon, RemainingHorizon };

std::string_view to_string(TuningVariant v);
TuningVariant parse_tuning_variant(std::string_view name);
std::string_view to_string(RolloutMode m);
RolloutMode parse_rollout_mode(std::string_view name);

struct TuningConfig {
  int n_model_draws = 25;
  int n_rollouts_per_draw = 2;
  int retune_interval = 1;
  int budget = 30;
  int initial_design = 8;
  int candidates = 512;
  int local_candidates = 64;
  RolloutMode rollout_mode = RolloutMode::FullHorizon;
  /// Optional replacement for the feasible box; theta1's upper bound is
  /// always capped at the horizon.
  std::optional<std::array<double, 3>> lower;
  std::optional<std::array<double, 3>> upper;
  /// Reward forest refit at every simulated step of a glucose rollout.
  ForestOptions rollout_forest{10, 5, 8, 0, true};

  void validate() const;
  [[nodiscard]] MinimizeOptions minimize_options() const;

  static TuningConfig bandit_defaults();
  /// Smaller budget and Monte Carlo sizes; each glucose rollout refits a
  /// forest per step.
  static TuningConfig mdp_defaults();
};

/// One method variant: a decision rule and where its parameter comes from.
struct PolicyVariant {
  std::string name;
  PolicyKind kind = PolicyKind::EpsilonGreedy;
  ParameterSource source = ParameterSource::tuned();
  TuningVariant tuning = TuningVariant::ConfidenceAveraged;
  GlucoseEstimator estimator = GlucoseEstimator::Ar2Linear;
};

/// Native decision-rule parameters of a schedule at each step t = 0..T
/// (epsilon, tau, or the UCB quantile z_{1 - alpha}).
struct PolicyPlan {
  PolicyKind kind = PolicyKind::EpsilonGreedy;
  int horizon = 1;
  std::vector<double> value;
};

PolicyPlan make_plan(PolicyKind kind, const Schedule& schedule);

// ---------------------------------------------------------------------------
// Learner states shared by real episodes and rollouts
// ---------------------------------------------------------------------------

template <class Posterior>
struct MabLearner {
  ArmStats stats;
  std::vector<Posterior> posterior;

  explicit MabLearner(std::size_t arms) : stats(arms), posterior(arms) {}

  void update(std::size_t arm, double reward) {
    stats.update(arm, reward);
    posterior[arm] = update_posterior(posterior[arm], reward);
  }
};

struct ContextualLearner {
  std::array<LinearAccumulator, 2> arms;
  explicit ContextualLearner(std::size_t dim)
      : arms{LinearAccumulator(dim), LinearAccumulator(dim)} {}
};

/// Lockstep cohort with one pooled data set.
struct CohortState {
  std::vector<GlucoseState> patients;
  std::vector<GlucoseObservation> transitions;
  Table reward_features{kLagFeatures};
  std::vector<double> rewards;

  void record(const GlucoseState& s, int action, const GlucoseTransition& tr);
};

template <class Model>
struct LearnerFor;
template <>
struct LearnerFor<BernoulliMab> {
  using type = MabLearner<BetaArmPosterior>;
};
template <>
struct LearnerFor<GaussianMab> {
  using type = MabLearner<NormalArmPosterior>;
};
template <>
struct LearnerFor<LinearContextualBandit> {
  using type = ContextualLearner;
};
template <>
struct LearnerFor<GlucoseModel> {
  using type = CohortState;
};
template <class Model>
using LearnerOf = typename LearnerFor<Model>::type;

// ---------------------------------------------------------------------------
// Rollouts
// ---------------------------------------------------------------------------

/// Simulates the policy inside `model` and returns cumulative regret
/// (bandits) or negative cumulative reward (glucose). With `start == nullptr`
/// a fresh episode is run: one pull per arm (one action-0 transition per
/// patient) and then steps 1..T. Otherwise the simulation continues from a
/// copy of `start` over steps t_start..T. Fully determined by `seed`.
double simulate(const BernoulliMab& model, const PolicyPlan& plan,
                const LearnerOf<BernoulliMab>* start, int t_start,
                const TuningConfig& cfg, std::uint64_t seed);
double simulate(const GaussianMab& model, const PolicyPlan& plan,
                const LearnerOf<GaussianMab>* start, int t_start,
                const TuningConfig& cfg, std::uint64_t seed);
double simulate(const LinearContextualBandit& model, const PolicyPlan& plan,
                const LearnerOf<LinearContextualBandit>* start, int t_start,
                const TuningConfig& cfg, std::uint64_t seed);
double simulate(const GlucoseModel& model, const PolicyPlan& plan,
                const LearnerOf<GlucoseModel>* start, int t_start,
                const TuningConfig& cfg, std::uint64_t seed);

/// One fresh full-horizon rollout of the schedule's policy inside `model`.
template <class Model>
double rollout_objective(const Schedule& theta, const Model& model,
                         PolicyKind kind, Rng& rng,
                         const TuningConfig& cfg = TuningConfig::bandit_defaults()) {
  return simulate(model, make_plan(kind, theta), nullptr, 1, cfg, rng());
}

// ---------------------------------------------------------------------------
// Objective estimation
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t kModelStream = 0x6d6f64656cULL;
inline constexpr std::uint64_t kRolloutStream = 0x726f6c6cULL;
inline constexpr std::uint64_t kOptimizerStream = 0x6f7074ULL;

/// Draws the n_model_draws models used throughout one tuning call.
template <class Confidence>
std::vector<typename Confidence::Model> draw_models(const Confidence& conf,
                                                    const TuningConfig& cfg,
                                                    std::uint64_t call_seed) {
  std::vector<typename Confidence::Model> models;
  models.reserve(static_cast<std::size_t>(cfg.n_model_draws));
  for (int k = 0; k < cfg.n_model_draws; ++k) {
    Rng rng = make_rng(derive_seed(call_seed, {kModelStream, static_cast<std::uint64_t>(k)}));
    models.push_back(conf.sample_model(rng));
  }
  return models;
}

/// Mean rollout objective over the given models, n_rollouts_per_draw
/// rollouts each. Rollout (k, r) is seeded from (call_seed, k, r), so two
/// schedules evaluated with the same call_seed share all random streams.
template <class Model>
double estimate_objective_on(const std::vector<Model>& models,
                             const Schedule& theta, PolicyKind kind,
                             const TuningConfig& cfg, std::uint64_t call_seed,
                             const LearnerOf<Model>* start = nullptr,
                             int t_start = 1) {
  const PolicyPlan plan = make_plan(kind, theta);
  std::vector<double> values;
  values.reserve(models.size() * static_cast<std::size_t>(cfg.n_rollouts_per_draw));
  for (std::size_t k = 0; k < models.size(); ++k) {
    for (int r = 0; r < cfg.n_rollouts_per_draw; ++r) {
      const std::uint64_t seed = derive_seed(
          call_seed, {kRolloutStream, k, static_cast<std::uint64_t>(r)});
      values.push_back(simulate(models[k], plan, start, t_start, cfg, seed));
    }
  }
  return pairwise_sum(values) / static_cast<double>(values.size());
}

/// Confidence-averaged objective E_{M~C} R^T(theta, M~), estimated by Monte
/// Carlo with common random numbers keyed by call_seed.
template <class Confidence>
double estimate_objective(const Schedule& theta, const Confidence& conf,
                          PolicyKind kind, const TuningConfig& cfg,
                          std::uint64_t call_seed,
                          const LearnerOf<typename Confidence::Model>* start = nullptr,
                          int t_start = 1) {
  const auto models = draw_models(conf, cfg, call_seed);
  return estimate_objective_on(models, theta, kind, cfg, call_seed, start, t_start);
}

struct TuneResult {
  Schedule schedule;
  double estimated_objective;
  int evaluations;
};

/// Box used for tuning at horizon T.
std::pair<std::array<double, 3>, std::array<double, 3>> tuning_bounds(
    const TuningConfig& cfg, int horizon);

/// Minimizes the estimated objective over the feasible box with the GP
/// optimizer. Models are drawn once per call.
template <class Confidence>
TuneResult tune_theta(const Confidence& conf, PolicyKind kind, int horizon,
                      const TuningConfig& cfg, std::uint64_t call_seed,
                      const LearnerOf<typename Confidence::Model>* start = nullptr,
                      int t_start = 1) {
  cfg.validate();
  const auto models = draw_models(conf, cfg, call_seed);
  const auto [lo, hi] = tuning_bounds(cfg, horizon);
  const Objective objective = [&](std::span<const double> x) {
    const Schedule s = clamp_to_feasible({x[0], x[1], x[2]}, horizon);
    return estimate_objective_on(models, s, kind, cfg, call_seed, start, t_start);
  };
  Rng rng = make_rng(derive_seed(call_seed, {kOptimizerStream}));
  const MinimizeResult r = minimize(objective, lo, hi, cfg.minimize_options(), rng);
  return {clamp_to_feasible({r.x[0], r.x[1], r.x[2]}, horizon),
          r.estimated_minimum, static_cast<int>(r.evaluated_y.size())};
}

// ---------------------------------------------------------------------------
// Episodes
// ---------------------------------------------------------------------------

struct GlucoseRunOptions {
  ForestOptions q_forest{};
  NpOptions np{};
};

/// Runs one episode of the variant against the true environment: initial
/// pulls, then per step an optional refit and retune, the decision and its
/// outcome. Seeds of every random stream derive from `seed`.
EpisodeRecord run_pe_episode(const BernoulliMab& env, const PolicyVariant& variant,
                             const TuningConfig& cfg, int horizon,
                             std::uint64_t seed);
EpisodeRecord run_pe_episode(const GaussianMab& env, const PolicyVariant& variant,
                             const TuningConfig& cfg, int horizon,
                             std::uint64_t seed);
EpisodeRecord run_pe_episode(const LinearContextualBandit& env,
                             const PolicyVariant& variant,
                             const TuningConfig& cfg, int horizon,
                             std::uint64_t seed);
EpisodeRecord run_pe_episode(const GlucoseMdp& env, const PolicyVariant& variant,
                             const TuningConfig& cfg,
                             const GlucoseRunOptions& options, int horizon,
                             std::uint64_t seed);

}  // namespace pe
