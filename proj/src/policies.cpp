#include "pe/policies.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include <boost/math/distributions/normal.hpp>

namespace pe {

ArmStats::ArmStats(std::size_t arms) : n_(arms, 0), mean_(arms, 0.0), m2_(arms, 0.0) {
  if (arms == 0) throw PreconditionError("ArmStats needs at least one arm");
}

void ArmStats::update(std::size_t arm, double reward) {
  if (arm >= n_.size()) throw std::out_of_range("arm index out of range");
  const double n = static_cast<double>(++n_[arm]);
  const double delta = reward - mean_[arm];
  mean_[arm] += delta / n;
  m2_[arm] += delta * (reward - mean_[arm]);
}

double ArmStats::mean(std::size_t arm) const {
  if (count(arm) < 1) throw PreconditionError("mean of an unpulled arm");
  return mean_[arm];
}

double ArmStats::variance(std::size_t arm) const {
  if (count(arm) < 2) throw PreconditionError("variance needs two pulls");
  return m2_[arm] / static_cast<double>(n_[arm] - 1);
}

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::EpsilonGreedy: return "epsilon-greedy";
    case PolicyKind::Ucb: return "ucb";
    case PolicyKind::Thompson: return "thompson";
    case PolicyKind::Gittins: return "gittins";
  }
  return "?";
}

PolicyKind parse_policy_kind(std::string_view name) {
  if (name == "epsilon-greedy") return PolicyKind::EpsilonGreedy;
  if (name == "ucb") return PolicyKind::Ucb;
  if (name == "thompson") return PolicyKind::Thompson;
  if (name == "gittins") return PolicyKind::Gittins;
  throw PreconditionError("unknown policy kind '" + std::string(name) + "'");
}

std::string_view to_string(Formula f) {
  switch (f) {
    case Formula::HalfInverseT: return "half-inverse-t";
    case Formula::InverseT: return "inverse-t";
    case Formula::PowerDecay: return "power-0.8";
    case Formula::UcbRamp: return "ucb-ramp";
  }
  return "?";
}

Formula parse_formula(std::string_view name) {
  if (name == "half-inverse-t") return Formula::HalfInverseT;
  if (name == "inverse-t") return Formula::InverseT;
  if (name == "power-0.8") return Formula::PowerDecay;
  if (name == "ucb-ramp") return Formula::UcbRamp;
  throw PreconditionError("unknown formula '" + std::string(name) + "'");
}

double formula_value(Formula f, int t) {
  if (t < 1) throw PreconditionError("formula baselines start at t = 1");
  const double td = static_cast<double>(t);
  switch (f) {
    case Formula::HalfInverseT: return 0.5 / td;
    case Formula::InverseT: return 1.0 / td;
    case Formula::PowerDecay: return std::pow(0.8, td);
    case Formula::UcbRamp: return 0.5 - 0.45 / td;
  }
  return 0.0;
}

double ParameterSource::untuned_value(int t) const {
  switch (kind) {
    case Kind::Fixed: return value;
    case Kind::FromFormula: return formula_value(formula, t);
    case Kind::Tuned: break;
  }
  throw PreconditionError("tuned parameter sources have no untuned value");
}

double native_parameter(PolicyKind kind, double eta) {
  const double e = std::clamp(eta, 0.0, 1.0);
  switch (kind) {
    case PolicyKind::Ucb: return std::max(0.5 * (1.0 - e), kUcbAlphaFloor);
    default: return e;
  }
}

namespace {

std::size_t greedy_arm(const ArmStats& stats, Rng& rng) {
  for (std::size_t i = 0; i < stats.arms(); ++i) {
    if (stats.count(i) == 0) {
      throw PreconditionError("epsilon-greedy needs every arm pulled once");
    }
  }
  return argmax_uniform_ties(stats.means(), rng);
}

}  // namespace

std::size_t epsilon_greedy_select(const ArmStats& stats, double epsilon,
                                  Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw PreconditionError("epsilon must lie in [0, 1]");
  }
  const double u = uniform01(rng);
  if (u < epsilon) {
    for (std::size_t i = 0; i < stats.arms(); ++i) {
      if (stats.count(i) == 0) {
        throw PreconditionError("epsilon-greedy needs every arm pulled once");
      }
    }
    return uniform_index(stats.arms(), rng);
  }
  return greedy_arm(stats, rng);
}

double ucb_quantile(double alpha) {
  if (!(alpha > 0.0 && alpha <= 0.5)) {
    throw PreconditionError("UCB alpha must lie in (0, 0.5]");
  }
  if (alpha == 0.5) return 0.0;
  static const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, 1.0 - alpha);
}

std::size_t ucb_select(const ArmStats& stats, double alpha, Rng& rng) {
  return ucb_select_z(stats, ucb_quantile(alpha), rng);
}

std::size_t ucb_select_z(const ArmStats& stats, double z, Rng& rng) {
  thread_local std::vector<double> bounds;
  bounds.resize(stats.arms());
  for (std::size_t i = 0; i < stats.arms(); ++i) {
    const std::size_t n = stats.count(i);
    if (n < 2) {
      bounds[i] = std::numeric_limits<double>::infinity();
    } else {
      const double s = std::sqrt(stats.variance(i));
      bounds[i] = stats.mean(i) + z * s / std::sqrt(static_cast<double>(n));
    }
  }
  return argmax_uniform_ties(bounds, rng);
}

std::size_t ts_select_from_draws(std::span<const double> omega,
                                 std::span<const double> draws, double tau,
                                 Rng& rng) {
  if (omega.size() != draws.size() || omega.empty()) {
    throw PreconditionError("one draw per arm is required");
  }
  if (!(tau >= 0.0 && tau <= 1.0)) throw PreconditionError("tau must lie in [0, 1]");
  thread_local std::vector<double> scores;
  scores.resize(omega.size());
  for (std::size_t i = 0; i < omega.size(); ++i) {
    scores[i] = tau == 1.0 ? draws[i] : omega[i] + tau * (draws[i] - omega[i]);
  }
  return argmax_uniform_ties(scores, rng);
}

std::size_t contextual_greedy(std::span<const Eigen::VectorXd> coefficients,
                              const Eigen::VectorXd& x, Rng& rng) {
  thread_local std::vector<double> scores;
  scores.resize(coefficients.size());
  for (std::size_t a = 0; a < coefficients.size(); ++a) {
    if (coefficients[a].size() != x.size()) {
      throw PreconditionError("coefficient/context dimension mismatch");
    }
    scores[a] = x.dot(coefficients[a]);
  }
  return argmax_uniform_ties(scores, rng);
}

}  // namespace pe
