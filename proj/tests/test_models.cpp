#include <cmath>
#include <vector>

#include "doctest.h"
#include "pe/confidence.hpp"
#include "pe/models.hpp"

using namespace pe;

namespace {

// Gauss-Jordan elimination with partial pivoting on the normal equations.
std::vector<double> normal_equations(const std::vector<std::vector<double>>& X,
                                     const std::vector<double>& y) {
  const std::size_t p = X[0].size();
  std::vector<std::vector<double>> A(p, std::vector<double>(p + 1, 0.0));
  for (std::size_t i = 0; i < X.size(); ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t k = 0; k < p; ++k) A[j][k] += X[i][j] * X[i][k];
      A[j][p] += X[i][j] * y[i];
    }
  }
  for (std::size_t c = 0; c < p; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < p; ++r) {
      if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
    }
    std::swap(A[c], A[piv]);
    for (std::size_t r = 0; r < p; ++r) {
      if (r == c) continue;
      const double f = A[r][c] / A[c][c];
      for (std::size_t k = c; k <= p; ++k) A[r][k] -= f * A[c][k];
    }
  }
  std::vector<double> b(p);
  for (std::size_t j = 0; j < p; ++j) b[j] = A[j][p] / A[j][j];
  return b;
}

}  // namespace

TEST_SUITE("models") {

TEST_CASE("Beta-Bernoulli updates") {
  BetaArmPosterior p;
  CHECK(p.mean() == 0.5);
  for (double r : {1.0, 1.0, 1.0, 0.0}) p = update_posterior(p, r);
  CHECK(p.a == 4.0);
  CHECK(p.b == 2.0);
  CHECK(p.mean() == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(update_posterior(p, 0.5), PreconditionError);
}

TEST_CASE("normal-inverse-gamma update") {
  NormalArmPosterior p{0.0, 1.0, 1.0, 1.0};
  const double x = 2.0;
  const double m = (p.kappa * p.m + x) / (p.kappa + 1);
  const double kappa = p.kappa + 1;
  const double shape = p.shape + 0.5;
  const double scale = p.scale + p.kappa * (x - p.m) * (x - p.m) / (2 * (p.kappa + 1));
  const auto q = update_posterior(p, x);
  CHECK(q.m == doctest::Approx(m));
  CHECK(q.m == doctest::Approx(1.0));
  CHECK(q.kappa == doctest::Approx(kappa));
  CHECK(q.kappa == doctest::Approx(2.0));
  CHECK(q.shape == doctest::Approx(shape));
  CHECK(q.scale == doctest::Approx(scale));
}

TEST_CASE("posterior sampling") {
  Rng rng(1);
  BetaArmPosterior tight{1e9, 1e9};
  for (int i = 0; i < 100; ++i) CHECK(std::abs(tight.sample_mean(rng) - 0.5) <= 1e-3);

  Eigen::VectorXd mean(3);
  mean << 1.5, -2.0, 3.25;
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(3, 3);
  const Eigen::VectorXd d = sample_multivariate_normal(mean, zero, rng);
  CHECK((d.array() == mean.array()).all());

  // Beta(4, 2) moments.
  double s = 0, s2 = 0;
  const int n = 200000;
  BetaArmPosterior b{4, 2};
  for (int i = 0; i < n; ++i) {
    const double v = b.sample_mean(rng);
    s += v;
    s2 += v * v;
  }
  const double var = 4.0 * 2.0 / (36.0 * 7.0);
  CHECK(std::abs(s / n - 2.0 / 3.0) <= 4 * std::sqrt(var / n));
  CHECK(s2 / n - (s / n) * (s / n) == doctest::Approx(var).epsilon(0.02));
}

TEST_CASE("OLS") {
  Rng rng(2);
  const int n = 30;
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd beta(3);
  beta << 1.5, -0.25, 2.0;
  for (int i = 0; i < n; ++i) X.row(i) << 1.0, standard_normal(rng), standard_normal(rng);
  const Eigen::VectorXd y = X * beta;
  const auto fit = fit_ols(X, y);
  CHECK((fit.coef - beta).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK_FALSE(fit.ridge);

  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(5, 1);
  Eigen::VectorXd yy(5);
  yy << 1, 2, 3, 4, 10;
  CHECK(fit_ols(ones, yy).coef(0) == doctest::Approx(4.0));

  const std::vector<std::vector<double>> rows{{1, 0.5, 2.0}, {1, -1.0, 0.3}, {1, 2.2, -0.7},
                                              {1, 0.1, 1.1}, {1, 3.0, 0.0},  {1, -2.5, 4.4}};
  const std::vector<double> ry{1.2, -0.4, 3.3, 0.7, 2.9, -1.6};
  Eigen::MatrixXd A(6, 3);
  Eigen::VectorXd b(6);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 3; ++j) A(i, j) = rows[i][j];
    b(i) = ry[i];
  }
  const auto oracle = normal_equations(rows, ry);
  const auto f6 = fit_ols(A, b);
  for (int j = 0; j < 3; ++j) CHECK(std::abs(f6.coef(j) - oracle[j]) <= 1e-10);

  LinearAccumulator acc(3);
  for (int i = 0; i < 6; ++i) acc.add(A.row(i).transpose(), b(i));
  const auto fa = acc.fit();
  for (int j = 0; j < 3; ++j) CHECK(std::abs(fa.coef(j) - oracle[j]) <= 1e-9);
  CHECK(fa.sigma2 == doctest::Approx(f6.sigma2));

  CHECK_THROWS_AS(fit_ols(Eigen::MatrixXd::Ones(2, 3), Eigen::VectorXd::Ones(2)),
                  NotIdentifiableError);

  Eigen::MatrixXd dup(4, 2);
  dup << 1, 2, 1, 2, 1, 2, 1, 2;
  const auto r = fit_ols(dup, Eigen::VectorXd::Ones(4));
  CHECK(r.ridge);
  CHECK((dup * r.coef - Eigen::VectorXd::Ones(4)).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("context model") {
  std::vector<Eigen::VectorXd> same(10, Eigen::Vector2d(0.3, -1.0));
  const auto f = fit_context_model(same);
  CHECK(f.mean(0) == doctest::Approx(0.3));
  CHECK(f.mean(1) == doctest::Approx(-1.0));
  CHECK(f.cov.cwiseAbs().maxCoeff() <= 1e-6);

  std::vector<Eigen::VectorXd> two{Eigen::Vector2d(0, 0), Eigen::Vector2d(2, 2)};
  const auto g = fit_context_model(two);
  CHECK(g.mean(0) == doctest::Approx(1.0));
  CHECK(g.mean(1) == doctest::Approx(1.0));

  Rng rng(3);
  const int n = 100000;
  std::vector<Eigen::VectorXd> many;
  many.reserve(n);
  for (int i = 0; i < n; ++i) many.emplace_back(Eigen::Vector2d(standard_normal(rng), standard_normal(rng)));
  const auto h = fit_context_model(many);
  for (int j = 0; j < 2; ++j) {
    CHECK(std::abs(h.mean(j)) <= 4.0 / std::sqrt(n));
    CHECK(std::abs(h.cov(j, j) - 1.0) <= 0.05);
  }
  CHECK_THROWS_AS(fit_context_model(std::span<const Eigen::VectorXd>(many.data(), 1)),
                  NotIdentifiableError);
}

TEST_CASE("confidence models") {
  Rng rng(4);
  BernoulliConfidence bc{{{4, 2}, {1, 1}}};
  CHECK(bc.point_model().means() == std::vector<double>{4.0 / 6.0, 0.5});
  const auto m = bc.sample_model(rng);
  CHECK(m.arms() == 2);

  GaussianConfidence gc{{NormalArmPosterior{}, NormalArmPosterior{0.2, 5, 3, 1}}};
  const auto pm = gc.point_model();
  CHECK(pm.means()[1] == 0.2);
  CHECK(pm.sigmas()[1] == doctest::Approx(std::sqrt(0.5)));

  std::array<LinearAccumulator, 2> arms{LinearAccumulator(3), LinearAccumulator(3)};
  std::vector<Eigen::VectorXd> z;
  const auto env = LinearContextualBandit::defaults();
  for (int i = 0; i < 40; ++i) {
    const auto x = env.draw_context(rng);
    z.push_back(x.tail(2));
    arms[i % 2].add(x, env.pull(i % 2, x, rng));
  }
  const auto cc = make_contextual_confidence(arms, z);
  CHECK(cc.noise_sd > 0.2);
  CHECK(cc.noise_sd < 1.0);
  const auto cm = cc.sample_model(rng);
  CHECK(cm.dimension() == 3);
}

}
