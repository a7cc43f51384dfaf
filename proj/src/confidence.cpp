#include "pe/confidence.hpp"

#include <cmath>
#include <string>

namespace pe {

BernoulliMab BernoulliConfidence::sample_model(Rng& rng) const {
  std::vector<double> p(arms.size());
  for (std::size_t i = 0; i < arms.size(); ++i) {
    if (!arms[i].proper()) throw PreconditionError("improper Beta posterior");
    p[i] = arms[i].sample_mean(rng);
  }
  return BernoulliMab(std::move(p));
}

BernoulliMab BernoulliConfidence::point_model() const {
  std::vector<double> p(arms.size());
  for (std::size_t i = 0; i < arms.size(); ++i) p[i] = arms[i].mean();
  return BernoulliMab(std::move(p));
}

GaussianMab GaussianConfidence::sample_model(Rng& rng) const {
  std::vector<double> mu(arms.size()), sd(arms.size());
  for (std::size_t i = 0; i < arms.size(); ++i) {
    const auto [m, v] = arms[i].sample_mean_variance(rng);
    // Sampled means may leave [0, 1]; the model keeps them as drawn.
    mu[i] = m;
    sd[i] = std::sqrt(v);
  }
  return GaussianMab(std::move(mu), std::move(sd));
}

GaussianMab GaussianConfidence::point_model() const {
  std::vector<double> mu(arms.size()), sd(arms.size());
  for (std::size_t i = 0; i < arms.size(); ++i) {
    mu[i] = arms[i].mean();
    sd[i] = std::sqrt(arms[i].expected_variance());
  }
  return GaussianMab(std::move(mu), std::move(sd));
}

LinearContextualBandit ContextualConfidence::sample_model(Rng& rng) const {
  std::array<Eigen::VectorXd, 2> beta;
  for (std::size_t a = 0; a < 2; ++a) {
    beta[a] = sample_multivariate_normal(arms[a].coef, arms[a].cov, rng);
  }
  return LinearContextualBandit(std::move(beta), context.mean, context.cov,
                                noise_sd);
}

LinearContextualBandit ContextualConfidence::point_model() const {
  return LinearContextualBandit({arms[0].coef, arms[1].coef}, context.mean,
                                context.cov, noise_sd);
}

ContextualConfidence make_contextual_confidence(
    const std::array<LinearAccumulator, 2>& arms,
    std::span<const Eigen::VectorXd> contexts) {
  ContextualConfidence conf;
  double rss = 0.0, df = 0.0;
  for (std::size_t a = 0; a < 2; ++a) {
    conf.arms[a] = arms[a].fit();
    const double d =
        static_cast<double>(conf.arms[a].n) - static_cast<double>(conf.arms[a].rank);
    if (d > 0.0 && std::isfinite(conf.arms[a].sigma2)) {
      rss += conf.arms[a].sigma2 * d;
      df += d;
    }
  }
  conf.noise_sd = df > 0.0 ? std::max(std::sqrt(rss / df), 1e-12) : 1.0;
  conf.context = fit_context_model(contexts);
  return conf;
}

std::string_view to_string(GlucoseEstimator e) {
  switch (e) {
    case GlucoseEstimator::Ar2Linear: return "ar2-linear";
    case GlucoseEstimator::Ar1Linear: return "ar1-linear";
    case GlucoseEstimator::Ar2Np: return "ar2-np";
  }
  return "?";
}

GlucoseEstimator parse_glucose_estimator(std::string_view name) {
  if (name == "ar2-linear") return GlucoseEstimator::Ar2Linear;
  if (name == "ar1-linear") return GlucoseEstimator::Ar1Linear;
  if (name == "ar2-np") return GlucoseEstimator::Ar2Np;
  throw PreconditionError("unknown estimator '" + std::string(name) + "'");
}

namespace {

double draw_from_pool(const std::shared_ptr<const std::vector<double>>& pool,
                      Rng& rng) {
  if (!pool || pool->empty()) return 0.0;
  return (*pool)[uniform_index(pool->size(), rng)];
}

template <std::size_t N>
double dot(const Eigen::VectorXd& coef, const std::array<double, N>& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < N; ++i) s += coef(static_cast<Eigen::Index>(i)) * x[i];
  return s;
}

}  // namespace

double GlucoseModel::next_glucose(const GlucoseState& s, int action,
                                  Rng& rng) const {
  switch (kind) {
    case GlucoseEstimator::Ar2Linear:
      return dot(coef, ar2_features(s, action)) + sigma * standard_normal(rng);
    case GlucoseEstimator::Ar1Linear:
      return dot(coef, ar1_features(s, action)) + sigma * standard_normal(rng);
    case GlucoseEstimator::Ar2Np: {
      const auto x = lag_features(s, action);
      return np->sample(x, rng);
    }
  }
  throw PreconditionError("unknown glucose estimator");
}

double GlucoseModel::draw_diet(Rng& rng) const { return draw_from_pool(diet, rng); }

double GlucoseModel::draw_exercise(Rng& rng) const {
  return draw_from_pool(exercise, rng);
}

GlucoseState GlucoseModel::initial_state(Rng& rng) const {
  GlucoseState s;
  s.gl1 = s.gl2 = 100.0;
  s.di2 = draw_diet(rng);
  s.ex2 = draw_exercise(rng);
  s.di1 = draw_diet(rng);
  s.ex1 = draw_exercise(rng);
  s.a_prev = 0;
  return s;
}

GlucoseModel GlucoseConfidence::sample_model(Rng& rng) const {
  GlucoseModel m = point_model();
  if (used != GlucoseEstimator::Ar2Np) {
    m.coef = sample_multivariate_normal(linear.coef, linear.cov, rng);
  }
  return m;
}

GlucoseModel GlucoseConfidence::point_model() const {
  GlucoseModel m;
  m.kind = used;
  m.diet = diet;
  m.exercise = exercise;
  m.n_patients = n_patients;
  if (used == GlucoseEstimator::Ar2Np) {
    m.np = np;
  } else {
    m.coef = linear.coef;
    m.sigma = std::isfinite(linear.sigma2) ? std::sqrt(linear.sigma2) : 0.0;
  }
  return m;
}

GlucoseConfidence fit_glucose_confidence(
    std::span<const GlucoseObservation> data, GlucoseEstimator estimator,
    const NpOptions& np_options, Rng& rng) {
  GlucoseConfidence conf;
  conf.requested = estimator;
  auto diet = std::make_shared<std::vector<double>>();
  auto exercise = std::make_shared<std::vector<double>>();
  diet->reserve(data.size());
  exercise->reserve(data.size());
  for (const auto& o : data) {
    diet->push_back(o.diet);
    exercise->push_back(o.exercise);
  }
  conf.diet = std::move(diet);
  conf.exercise = std::move(exercise);

  const auto n = static_cast<Eigen::Index>(data.size());
  if (estimator == GlucoseEstimator::Ar2Np &&
      data.size() >= NpConditionalFit::kMinTransitions) {
    Table X(kLagFeatures);
    X.reserve(data.size());
    std::vector<double> y;
    y.reserve(data.size());
    for (const auto& o : data) {
      X.append(lag_features(o.state, o.action));
      y.push_back(o.glucose);
    }
    conf.used = GlucoseEstimator::Ar2Np;
    conf.np = std::make_shared<const NpConditionalFit>(
        fit_np_conditional(X, y, np_options, rng));
    return conf;
  }

  conf.used = estimator == GlucoseEstimator::Ar1Linear ? GlucoseEstimator::Ar1Linear
                                                       : GlucoseEstimator::Ar2Linear;
  const bool ar1 = conf.used == GlucoseEstimator::Ar1Linear;
  const Eigen::Index p = ar1 ? kAr1Features : kAr2Features;
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = data[static_cast<std::size_t>(i)];
    if (ar1) {
      const auto f = ar1_features(o.state, o.action);
      for (Eigen::Index j = 0; j < p; ++j) X(i, j) = f[static_cast<std::size_t>(j)];
    } else {
      const auto f = ar2_features(o.state, o.action);
      for (Eigen::Index j = 0; j < p; ++j) X(i, j) = f[static_cast<std::size_t>(j)];
    }
    y(i) = o.glucose;
  }
  conf.linear = fit_ols(X, y);
  return conf;
}

}  // namespace pe
