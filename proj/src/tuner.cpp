#include "pe/tuner.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <type_traits>

#include "pe/gittins.hpp"

namespace pe {

namespace {

constexpr std::uint64_t kEnvStream = 1;
constexpr std::uint64_t kPolicyStream = 2;
constexpr std::uint64_t kForestStream = 3;
constexpr std::uint64_t kTunerStream = 4;
constexpr std::uint64_t kFitStream = 5;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_steps(const PolicyPlan& plan, int t_start) {
  if (plan.horizon < 1 ||
      plan.value.size() != static_cast<std::size_t>(plan.horizon) + 1) {
    throw PreconditionError("malformed policy plan");
  }
  if (t_start < 1 || t_start > plan.horizon + 1) {
    throw PreconditionError("rollout start outside [1, T + 1]");
  }
}

template <class Posterior>
std::size_t mab_select(PolicyKind kind, double value,
                       const MabLearner<Posterior>& learner, Rng& rng) {
  switch (kind) {
    case PolicyKind::EpsilonGreedy:
      return epsilon_greedy_select(learner.stats, value, rng);
    case PolicyKind::Ucb:
      return ucb_select_z(learner.stats, value, rng);
    case PolicyKind::Thompson:
      return ts_select(std::span<const Posterior>(learner.posterior), value, rng);
    case PolicyKind::Gittins:
      break;
  }
  throw PreconditionError("Gittins has no exploration parameter");
}

template <class Env>
double simulate_mab(const Env& model, const PolicyPlan& plan,
                    const LearnerOf<Env>* start, int t_start, std::uint64_t seed) {
  check_steps(plan, t_start);
  Rng env_rng = make_rng(derive_seed(seed, {kEnvStream}));
  Rng pol_rng = make_rng(derive_seed(seed, {kPolicyStream}));
  LearnerOf<Env> learner = start ? *start : LearnerOf<Env>(model.arms());
  if (learner.stats.arms() != model.arms()) {
    throw PreconditionError("learner and model disagree on the arm count");
  }
  if (!start) {
    for (std::size_t a = 0; a < model.arms(); ++a) {
      learner.update(a, model.pull(a, env_rng));
    }
    t_start = 1;
  }
  const double best = model.optimal_mean();
  double regret = 0.0;
  for (int t = t_start; t <= plan.horizon; ++t) {
    const std::size_t a = mab_select(plan.kind, plan.value[static_cast<std::size_t>(t)],
                                     learner, pol_rng);
    const double r = model.pull(a, env_rng);
    regret += best - r;
    learner.update(a, r);
  }
  return regret;
}

std::size_t contextual_epsilon_select(const ContextualLearner& learner,
                                      double epsilon, const Eigen::VectorXd& x,
                                      Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw PreconditionError("epsilon must lie in [0, 1]");
  }
  if (uniform01(rng) < epsilon) return uniform_index(2, rng);
  const std::array<Eigen::VectorXd, 2> coef{learner.arms[0].coefficients(),
                                            learner.arms[1].coefficients()};
  return contextual_greedy(coef, x, rng);
}

int cohort_action(const RewardModel& q, int forced, const GlucoseState& s,
                  double epsilon, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw PreconditionError("epsilon must lie in [0, 1]");
  }
  if (uniform01(rng) < epsilon) return static_cast<int>(uniform_index(2, rng));
  if (forced >= 0) return forced;
  return mdp_greedy(q, s);
}

// Fits the reward model when both actions have data; otherwise returns the
// action that has none, which the greedy step then plays.
int prepare_reward_model(const CohortState& c, const ForestOptions& options,
                         Rng& rng, RewardModel& q) {
  if (has_both_actions(c.reward_features)) {
    q = fit_reward_model(c.reward_features, c.rewards, options, rng);
    return -1;
  }
  bool any0 = false;
  for (std::size_t i = 0; i < c.reward_features.rows(); ++i) {
    if (c.reward_features(i, 6) == 0.0) any0 = true;
  }
  return any0 ? 1 : 0;
}

void require_kind(const PolicyVariant& v, std::initializer_list<PolicyKind> allowed,
                  const char* env) {
  for (PolicyKind k : allowed) {
    if (v.kind == k) return;
  }
  throw PreconditionError("policy '" + std::string(to_string(v.kind)) +
                          "' is not available for " + env);
}

void check_episode(const PolicyVariant& v, const TuningConfig& cfg, int horizon) {
  if (horizon < 1) throw PreconditionError("horizon must be >= 1");
  if (v.source.kind == ParameterSource::Kind::Tuned) cfg.validate();
}

template <class Conf, class Learner>
Schedule retune(const Conf& conf, const PolicyVariant& v, int horizon,
                const TuningConfig& cfg, std::uint64_t seed, int t,
                const Learner& learner) {
  const std::uint64_t call_seed =
      derive_seed(seed, {kTunerStream, static_cast<std::uint64_t>(t)});
  const bool remaining = cfg.rollout_mode == RolloutMode::RemainingHorizon;
  const Learner* start = remaining ? &learner : nullptr;
  const int t0 = remaining ? t : 1;
  if (v.tuning == TuningVariant::PointEstimate) {
    const PointMass<typename Conf::Model> point{conf.point_model()};
    return tune_theta(point, v.kind, horizon, cfg, call_seed, start, t0).schedule;
  }
  return tune_theta(conf, v.kind, horizon, cfg, call_seed, start, t0).schedule;
}

struct StepParameter {
  double native = 0.0;
  double logged = kNaN;
  std::optional<std::array<double, 3>> theta;
};

bool retune_due(const std::optional<Schedule>& theta, int t, const TuningConfig& cfg) {
  return !theta || (t - 1) % cfg.retune_interval == 0;
}

template <class Env, class Conf>
EpisodeRecord run_mab_episode(const Env& env, const PolicyVariant& v,
                              const TuningConfig& cfg, int horizon,
                              std::uint64_t seed) {
  check_episode(v, cfg, horizon);
  EpisodeRecord rec;
  rec.variant = v.name;
  rec.seed = seed;
  Rng env_rng = make_rng(derive_seed(seed, {kEnvStream}));
  Rng pol_rng = make_rng(derive_seed(seed, {kPolicyStream}));
  LearnerOf<Env> learner(env.arms());
  for (std::size_t a = 0; a < env.arms(); ++a) learner.update(a, env.pull(a, env_rng));

  std::optional<Schedule> theta;
  const double best = env.optimal_mean();
  double regret = 0.0, pseudo = 0.0;
  for (int t = 1; t <= horizon; ++t) {
    std::size_t a = 0;
    StepParameter p;
    if (v.kind == PolicyKind::Gittins) {
      if constexpr (std::is_same_v<Env, BernoulliMab>) {
        a = gittins_select(std::span<const BetaArmPosterior>(learner.posterior), t,
                           horizon, pol_rng);
      } else {
        throw PreconditionError("Gittins is only available for Bernoulli bandits");
      }
    } else {
      if (v.source.kind == ParameterSource::Kind::Tuned) {
        if (retune_due(theta, t, cfg)) {
          theta = retune(Conf{learner.posterior}, v, horizon, cfg, seed, t, learner);
        }
        p.logged = (*theta)(t);
        p.native = native_parameter(v.kind, p.logged);
        p.theta = theta->theta();
      } else {
        p.native = v.source.untuned_value(t);
        p.logged = p.native;
      }
      const double value = v.kind == PolicyKind::Ucb ? ucb_quantile(p.native) : p.native;
      a = mab_select(v.kind, value, learner, pol_rng);
    }
    const double r = env.pull(a, env_rng);
    regret += best - r;
    pseudo += best - env.mean(a);
    learner.update(a, r);
    rec.history.append({t, {}, a, r});
    rec.steps.push_back({t, 0, a, r, p.logged, p.theta, regret});
  }
  rec.cumulative = regret;
  rec.pseudo_regret = pseudo;
  return rec;
}

}  // namespace

std::string_view to_string(TuningVariant v) {
  return v == TuningVariant::PointEstimate ? "point-estimate" : "confidence-averaged";
}

TuningVariant parse_tuning_variant(std::string_view name) {
  if (name == "confidence-averaged") return TuningVariant::ConfidenceAveraged;
  if (name == "point-estimate") return TuningVariant::PointEstimate;
  throw PreconditionError("unknown tuning variant '" + std::string(name) + "'");
}

std::string_view to_string(RolloutMode m) {
  return m == RolloutMode::RemainingHorizon ? "remaining-horizon" : "full-horizon";
}

RolloutMode parse_rollout_mode(std::string_view name) {
  if (name == "full-horizon") return RolloutMode::FullHorizon;
  if (name == "remaining-horizon") return RolloutMode::RemainingHorizon;
  throw PreconditionError("unknown rollout mode '" + std::string(name) + "'");
}

void TuningConfig::validate() const {
  if (n_model_draws < 1 || n_rollouts_per_draw < 1) {
    throw PreconditionError("model draws and rollouts per draw must be >= 1");
  }
  if (retune_interval < 1) throw PreconditionError("retune_interval must be >= 1");
  if (initial_design < 2 || budget < initial_design) {
    throw PreconditionError("budget must be >= initial_design >= 2");
  }
  if (candidates < 1 || local_candidates < 0) {
    throw PreconditionError("invalid candidate counts");
  }
  if (rollout_forest.n_trees < 1 || rollout_forest.min_leaf < 1 ||
      rollout_forest.max_depth < 0) {
    throw PreconditionError("invalid rollout forest options");
  }
}

MinimizeOptions TuningConfig::minimize_options() const {
  MinimizeOptions o;
  o.budget = budget;
  o.initial_design = initial_design;
  o.candidates = candidates;
  o.local_candidates = local_candidates;
  return o;
}

TuningConfig TuningConfig::bandit_defaults() { return TuningConfig{}; }

TuningConfig TuningConfig::mdp_defaults() {
  TuningConfig c;
  c.budget = 15;
  c.n_model_draws = 5;
  c.n_rollouts_per_draw = 1;
  return c;
}

std::pair<std::array<double, 3>, std::array<double, 3>> tuning_bounds(
    const TuningConfig& cfg, int horizon) {
  std::array<double, 3> lo = cfg.lower.value_or(schedule_lower_bounds(horizon));
  std::array<double, 3> hi = cfg.upper.value_or(schedule_upper_bounds(horizon));
  const auto box_lo = schedule_lower_bounds(horizon);
  const auto box_hi = schedule_upper_bounds(horizon);
  for (std::size_t j = 0; j < 3; ++j) {
    lo[j] = std::clamp(lo[j], box_lo[j], box_hi[j]);
    hi[j] = std::clamp(hi[j], box_lo[j], box_hi[j]);
    if (lo[j] > hi[j]) throw PreconditionError("tuning bounds are empty");
  }
  return {lo, hi};
}

PolicyPlan make_plan(PolicyKind kind, const Schedule& schedule) {
  if (kind == PolicyKind::Gittins) {
    throw PreconditionError("Gittins has no exploration parameter");
  }
  PolicyPlan plan;
  plan.kind = kind;
  plan.horizon = schedule.horizon();
  plan.value.resize(static_cast<std::size_t>(plan.horizon) + 1);
  for (int t = 0; t <= plan.horizon; ++t) {
    const double native = native_parameter(kind, schedule(t));
    plan.value[static_cast<std::size_t>(t)] =
        kind == PolicyKind::Ucb ? ucb_quantile(native) : native;
  }
  return plan;
}

void CohortState::record(const GlucoseState& s, int action,
                         const GlucoseTransition& tr) {
  transitions.push_back({s, action, tr.glucose, tr.next.di1, tr.next.ex1});
  reward_features.append(lag_features(s, action));
  rewards.push_back(tr.reward);
}

double simulate(const BernoulliMab& model, const PolicyPlan& plan,
                const LearnerOf<BernoulliMab>* start, int t_start,
                const TuningConfig&, std::uint64_t seed) {
  return simulate_mab(model, plan, start, t_start, seed);
}

double simulate(const GaussianMab& model, const PolicyPlan& plan,
                const LearnerOf<GaussianMab>* start, int t_start,
                const TuningConfig&, std::uint64_t seed) {
  return simulate_mab(model, plan, start, t_start, seed);
}

double simulate(const LinearContextualBandit& model, const PolicyPlan& plan,
                const LearnerOf<LinearContextualBandit>* start, int t_start,
                const TuningConfig&, std::uint64_t seed) {
  check_steps(plan, t_start);
  if (plan.kind != PolicyKind::EpsilonGreedy) {
    throw PreconditionError("contextual rollouts support epsilon-greedy only");
  }
  Rng env_rng = make_rng(derive_seed(seed, {kEnvStream}));
  Rng pol_rng = make_rng(derive_seed(seed, {kPolicyStream}));
  ContextualLearner learner = start ? *start : ContextualLearner(model.dimension());
  if (!start) {
    for (std::size_t a = 0; a < 2; ++a) {
      const Eigen::VectorXd x = model.draw_context(env_rng);
      learner.arms[a].add(x, model.pull(a, x, env_rng));
    }
    t_start = 1;
  }
  double regret = 0.0;
  for (int t = t_start; t <= plan.horizon; ++t) {
    const Eigen::VectorXd x = model.draw_context(env_rng);
    const std::size_t a = contextual_epsilon_select(
        learner, plan.value[static_cast<std::size_t>(t)], x, pol_rng);
    const double r = model.pull(a, x, env_rng);
    regret += model.optimal_mean(x) - r;
    learner.arms[a].add(x, r);
  }
  return regret;
}

double simulate(const GlucoseModel& model, const PolicyPlan& plan,
                const LearnerOf<GlucoseModel>* start, int t_start,
                const TuningConfig& cfg, std::uint64_t seed) {
  check_steps(plan, t_start);
  if (plan.kind != PolicyKind::EpsilonGreedy) {
    throw PreconditionError("glucose rollouts support epsilon-greedy only");
  }
  Rng env_rng = make_rng(derive_seed(seed, {kEnvStream}));
  Rng pol_rng = make_rng(derive_seed(seed, {kPolicyStream}));
  Rng forest_rng = make_rng(derive_seed(seed, {kForestStream}));
  CohortState cohort;
  if (start) {
    cohort = *start;
  } else {
    if (model.n_patients < 1) throw PreconditionError("cohort needs a patient");
    for (int i = 0; i < model.n_patients; ++i) {
      cohort.patients.push_back(model.initial_state(env_rng));
    }
    for (auto& s : cohort.patients) {
      const GlucoseTransition tr = glucose_step(model, s, 0, env_rng);
      if (!std::isfinite(tr.reward)) return kNaN;
      cohort.record(s, 0, tr);
      s = tr.next;
    }
    t_start = 1;
  }
  const double n = static_cast<double>(cohort.patients.size());
  double total = 0.0;
  RewardModel q;
  for (int t = t_start; t <= plan.horizon; ++t) {
    const int forced = prepare_reward_model(cohort, cfg.rollout_forest, forest_rng, q);
    const double eps = plan.value[static_cast<std::size_t>(t)];
    double step = 0.0;
    for (auto& s : cohort.patients) {
      const int a = cohort_action(q, forced, s, eps, pol_rng);
      const GlucoseTransition tr = glucose_step(model, s, a, env_rng);
      if (!std::isfinite(tr.reward)) return kNaN;
      cohort.record(s, a, tr);
      step += tr.reward;
      s = tr.next;
    }
    total += step / n;
  }
  return -total;
}

EpisodeRecord run_pe_episode(const BernoulliMab& env, const PolicyVariant& variant,
                             const TuningConfig& cfg, int horizon,
                             std::uint64_t seed) {
  return run_mab_episode<BernoulliMab, BernoulliConfidence>(env, variant, cfg,
                                                            horizon, seed);
}

EpisodeRecord run_pe_episode(const GaussianMab& env, const PolicyVariant& variant,
                             const TuningConfig& cfg, int horizon,
                             std::uint64_t seed) {
  require_kind(variant, {PolicyKind::EpsilonGreedy, PolicyKind::Ucb, PolicyKind::Thompson},
               "Gaussian bandits");
  return run_mab_episode<GaussianMab, GaussianConfidence>(env, variant, cfg,
                                                          horizon, seed);
}

EpisodeRecord run_pe_episode(const LinearContextualBandit& env,
                             const PolicyVariant& variant,
                             const TuningConfig& cfg, int horizon,
                             std::uint64_t seed) {
  require_kind(variant, {PolicyKind::EpsilonGreedy}, "the contextual bandit");
  check_episode(variant, cfg, horizon);
  EpisodeRecord rec;
  rec.variant = variant.name;
  rec.seed = seed;
  Rng env_rng = make_rng(derive_seed(seed, {kEnvStream}));
  Rng pol_rng = make_rng(derive_seed(seed, {kPolicyStream}));
  const auto d = static_cast<Eigen::Index>(env.dimension());
  ContextualLearner learner(env.dimension());
  std::vector<Eigen::VectorXd> contexts;
  for (std::size_t a = 0; a < 2; ++a) {
    const Eigen::VectorXd x = env.draw_context(env_rng);
    learner.arms[a].add(x, env.pull(a, x, env_rng));
    contexts.push_back(x.tail(d - 1));
  }

  std::optional<Schedule> theta;
  double regret = 0.0, pseudo = 0.0;
  for (int t = 1; t <= horizon; ++t) {
    const Eigen::VectorXd x = env.draw_context(env_rng);
    contexts.push_back(x.tail(d - 1));
    StepParameter p;
    if (variant.source.kind == ParameterSource::Kind::Tuned) {
      if (retune_due(theta, t, cfg)) {
        theta = retune(make_contextual_confidence(learner.arms, contexts), variant,
                       horizon, cfg, seed, t, learner);
      }
      p.logged = (*theta)(t);
      p.native = native_parameter(variant.kind, p.logged);
      p.theta = theta->theta();
    } else {
      p.native = variant.source.untuned_value(t);
      p.logged = p.native;
    }
    const std::size_t a = contextual_epsilon_select(learner, p.native, x, pol_rng);
    const double r = env.pull(a, x, env_rng);
    const double best = env.optimal_mean(x);
    regret += best - r;
    pseudo += best - env.mean_reward(a, x);
    learner.arms[a].add(x, r);
    rec.history.append({t, std::vector<double>(x.data(), x.data() + x.size()), a, r});
    rec.steps.push_back({t, 0, a, r, p.logged, p.theta, regret});
  }
  rec.cumulative = regret;
  rec.pseudo_regret = pseudo;
  return rec;
}

EpisodeRecord run_pe_episode(const GlucoseMdp& env, const PolicyVariant& variant,
                             const TuningConfig& cfg,
                             const GlucoseRunOptions& options, int horizon,
                             std::uint64_t seed) {
  require_kind(variant, {PolicyKind::EpsilonGreedy}, "the glucose MDP");
  check_episode(variant, cfg, horizon);
  env.validate();
  EpisodeRecord rec;
  rec.variant = variant.name;
  rec.seed = seed;
  Rng env_rng = make_rng(derive_seed(seed, {kEnvStream}));
  Rng pol_rng = make_rng(derive_seed(seed, {kPolicyStream}));

  CohortState cohort;
  for (int i = 0; i < env.n_patients; ++i) {
    cohort.patients.push_back(env.initial_state(env_rng));
  }
  for (auto& s : cohort.patients) {
    const GlucoseTransition tr = glucose_step(env, s, 0, env_rng);
    cohort.record(s, 0, tr);
    s = tr.next;
  }

  std::optional<Schedule> theta;
  const double n = static_cast<double>(env.n_patients);
  double total = 0.0;
  RewardModel q;
  for (int t = 1; t <= horizon; ++t) {
    StepParameter p;
    if (variant.source.kind == ParameterSource::Kind::Tuned) {
      if (retune_due(theta, t, cfg)) {
        Rng fit_rng = make_rng(derive_seed(seed, {kFitStream, static_cast<std::uint64_t>(t)}));
        try {
          GlucoseConfidence conf = fit_glucose_confidence(
              cohort.transitions, variant.estimator, options.np, fit_rng);
          conf.n_patients = env.n_patients;
          if (conf.fell_back()) rec.estimator_fallback_steps.push_back(t);
          theta = retune(conf, variant, horizon, cfg, seed, t, cohort);
        } catch (const NotIdentifiableError&) {
          // Keep the previous schedule; explore heavily before the first fit.
          if (!theta) theta = Schedule(1.0, 0.0, kTheta2Max, horizon);
          rec.estimator_fallback_steps.push_back(t);
        }
      }
      p.logged = (*theta)(t);
      p.native = native_parameter(variant.kind, p.logged);
      p.theta = theta->theta();
    } else {
      p.native = variant.source.untuned_value(t);
      p.logged = p.native;
    }

    Rng forest_rng = make_rng(derive_seed(seed, {kForestStream, static_cast<std::uint64_t>(t)}));
    const int forced = prepare_reward_model(cohort, options.q_forest, forest_rng, q);
    double step = 0.0;
    const std::size_t first_row = rec.steps.size();
    for (std::size_t i = 0; i < cohort.patients.size(); ++i) {
      GlucoseState& s = cohort.patients[i];
      const int a = cohort_action(q, forced, s, p.native, pol_rng);
      const GlucoseTransition tr = glucose_step(env, s, a, env_rng);
      cohort.record(s, a, tr);
      step += tr.reward;
      s = tr.next;
      rec.steps.push_back({t, static_cast<int>(i), static_cast<std::size_t>(a), tr.reward,
                           p.logged, p.theta, 0.0});
    }
    total += step / n;
    for (std::size_t k = first_row; k < rec.steps.size(); ++k) rec.steps[k].cumulative = total;
  }
  rec.cumulative = total;
  return rec;
}

}  // namespace pe
