#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "pe/confidence.hpp"
#include "pe/forest.hpp"
#include "pe/np_conditional.hpp"

using namespace pe;

namespace {

double smooth(double a, double b) { return std::sin(3 * a) + 0.5 * b * b; }

double knn_predict(const Table& X, const std::vector<double>& y, std::span<const double> x,
                   std::size_t k) {
  std::vector<std::pair<double, double>> d;
  d.reserve(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    double s = 0;
    for (std::size_t j = 0; j < X.cols(); ++j) s += (X(i, j) - x[j]) * (X(i, j) - x[j]);
    d.emplace_back(s, y[i]);
  }
  std::partial_sort(d.begin(), d.begin() + static_cast<long>(k), d.end());
  double m = 0;
  for (std::size_t i = 0; i < k; ++i) m += d[i].second;
  return m / static_cast<double>(k);
}

}  // namespace

TEST_SUITE("forest") {

TEST_CASE("constant targets give a constant forest") {
  Rng rng(1);
  Table X(2);
  std::vector<double> y;
  for (int i = 0; i < 200; ++i) {
    X.append(std::vector<double>{uniform01(rng), uniform01(rng)});
    y.push_back(3.25);
  }
  const auto f = fit_regression_forest(X, y, {}, rng);
  for (int i = 0; i < 20; ++i) {
    CHECK(f.predict(std::vector<double>{uniform01(rng) * 5, -uniform01(rng)}) == doctest::Approx(3.25));
  }
}

TEST_CASE("single depth-one tree recovers a perfect split") {
  Rng rng(2);
  Table X(1);
  std::vector<double> y;
  for (int i = 0; i < 40; ++i) {
    const double v = i % 2;
    X.append(std::vector<double>{v});
    y.push_back(v);
  }
  const ForestOptions opts{1, 1, 1, 0, false};
  const auto f = fit_regression_forest(X, y, opts, rng);
  CHECK(f.predict(std::vector<double>{0.0}) == 0.0);
  CHECK(f.predict(std::vector<double>{1.0}) == 1.0);
}

TEST_CASE("forest accuracy is comparable to nearest neighbours") {
  Rng rng(3);
  Table X(2), Xt(2);
  std::vector<double> y, yt;
  for (int i = 0; i < 2000; ++i) {
    const double a = uniform01(rng) * 2 - 1, b = uniform01(rng) * 2 - 1;
    X.append(std::vector<double>{a, b});
    y.push_back(smooth(a, b) + 0.1 * standard_normal(rng));
  }
  for (int i = 0; i < 500; ++i) {
    const double a = uniform01(rng) * 2 - 1, b = uniform01(rng) * 2 - 1;
    Xt.append(std::vector<double>{a, b});
    yt.push_back(smooth(a, b) + 0.1 * standard_normal(rng));
  }
  const auto f = fit_regression_forest(X, y, {}, rng);
  double mf = 0, mk = 0;
  for (std::size_t i = 0; i < Xt.rows(); ++i) {
    mf += std::pow(f.predict(Xt.row(i)) - yt[i], 2);
    mk += std::pow(knn_predict(X, y, Xt.row(i), 10) - yt[i], 2);
  }
  CHECK(mf <= 2.0 * mk);
}

TEST_CASE("forest fits are seed-deterministic") {
  Table X(1);
  std::vector<double> y;
  for (int i = 0; i < 100; ++i) {
    X.append(std::vector<double>{i * 0.01});
    y.push_back(std::sin(i * 0.1));
  }
  Rng a(9), b(9);
  const auto fa = fit_regression_forest(X, y, {}, a);
  const auto fb = fit_regression_forest(X, y, {}, b);
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> x{i * 0.02};
    CHECK(fa.predict(x) == fb.predict(x));
  }
}

TEST_CASE("reward model needs both actions") {
  Rng rng(4);
  Table F(kLagFeatures);
  std::vector<double> r;
  for (int i = 0; i < 30; ++i) {
    GlucoseState s;
    s.gl1 = 80 + i;
    F.append(lag_features(s, 0));
    r.push_back(1.0);
  }
  CHECK_FALSE(has_both_actions(F));
  CHECK_THROWS_AS(fit_reward_model(F, r, {}, rng), NotIdentifiableError);
  GlucoseState s;
  F.append(lag_features(s, 1));
  r.push_back(0.0);
  CHECK(has_both_actions(F));
  const auto m = fit_reward_model(F, r, {}, rng);
  CHECK(m.trained());
}

}

TEST_SUITE("np_conditional") {

TEST_CASE("zero residual variance reproduces the prediction") {
  Rng rng(5);
  Table X(2);
  std::vector<double> y;
  for (int i = 0; i < 120; ++i) {
    X.append(std::vector<double>{uniform01(rng), uniform01(rng)});
    y.push_back(42.0);
  }
  const auto fit = fit_np_conditional(X, y, {}, rng);
  for (int i = 0; i < 20; ++i) {
    const std::vector<double> x{uniform01(rng), uniform01(rng)};
    CHECK(np_sample_next_glucose(fit, x, rng) == fit.predict(x));
  }
}

TEST_CASE("noiseless linear data: conditional mean within 2 percent") {
  Rng rng(6);
  Table X(2);
  std::vector<double> y;
  const auto line = [](double a, double b) { return 100.0 + 20.0 * a - 10.0 * b; };
  for (int i = 0; i < 5000; ++i) {
    const double a = uniform01(rng), b = uniform01(rng);
    X.append(std::vector<double>{a, b});
    y.push_back(line(a, b));
  }
  const auto fit = fit_np_conditional(X, y, {}, rng);
  for (int i = 0; i < 100; ++i) {
    const double a = 0.05 + 0.9 * uniform01(rng), b = 0.05 + 0.9 * uniform01(rng);
    const std::vector<double> x{a, b};
    const double truth = line(a, b);
    CHECK(std::abs(fit.predict(x) - truth) <= 0.02 * std::abs(truth));
    double m = 0;
    for (int k = 0; k < 50; ++k) m += fit.sample(x, rng);
    CHECK(std::abs(m / 50 - truth) <= 0.02 * std::abs(truth));
  }
}

TEST_CASE("homoskedastic unit noise: sampled residual SD within 10 percent") {
  Rng rng(7);
  Table X(2);
  std::vector<double> y;
  for (int i = 0; i < 5000; ++i) {
    const double a = uniform01(rng), b = uniform01(rng);
    X.append(std::vector<double>{a, b});
    y.push_back(5.0 * a + standard_normal(rng));
  }
  const auto fit = fit_np_conditional(X, y, {}, rng);
  double s = 0, s2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const std::vector<double> x{uniform01(rng), uniform01(rng)};
    const double e = fit.sample(x, rng) - fit.predict(x);
    s += e;
    s2 += e * e;
  }
  const double sd = std::sqrt(s2 / n - (s / n) * (s / n));
  CHECK(std::abs(sd - 1.0) <= 0.1);
}

TEST_CASE("one stored residual") {
  Rng rng(8);
  Table X1(1);
  X1.append(std::vector<double>{0.0});
  std::vector<double> yy{1.0};
  Table Xf(1);
  std::vector<double> yf;
  for (int i = 0; i < 10; ++i) {
    Xf.append(std::vector<double>{static_cast<double>(i)});
    yf.push_back(7.0);
  }
  auto forest = fit_regression_forest(Xf, yf, {}, rng);
  const double h = 0.5;
  NpConditionalFit fit(forest, X1, {3.0}, {1.0}, h);
  const std::vector<double> x{2.0};
  double s = 0, s2 = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double e = fit.sample(x, rng) - fit.predict(x) - 3.0;
    s += e;
    s2 += e * e;
  }
  const double mean = s / n, sd = std::sqrt(s2 / n - mean * mean);
  CHECK(std::abs(mean) <= 4 * h / std::sqrt(n));
  CHECK(sd == doctest::Approx(h).epsilon(0.02));

  NpConditionalFit exact(forest, X1, {3.0}, {1.0}, 0.0);
  CHECK(exact.sample(x, rng) == exact.predict(x) + 3.0);
}

TEST_CASE("infinite covariate bandwidth gives uniform weights") {
  Rng rng(9);
  Table X(2);
  std::vector<double> y, r;
  for (int i = 0; i < 8; ++i) {
    X.append(std::vector<double>{uniform01(rng), uniform01(rng)});
    y.push_back(1.0);
    r.push_back(standard_normal(rng));
  }
  const double inf = std::numeric_limits<double>::infinity();
  NpConditionalFit fit(fit_regression_forest(X, y, {}, rng), X, r, {inf, inf}, 0.1);
  const auto w = fit.weights(std::vector<double>{0.3, 0.9});
  for (double v : w) CHECK(v == doctest::Approx(1.0 / 8));
}

TEST_CASE("too few transitions") {
  Rng rng(10);
  Table X(1);
  std::vector<double> y;
  for (int i = 0; i < 49; ++i) {
    X.append(std::vector<double>{double(i)});
    y.push_back(i);
  }
  CHECK_THROWS_AS(fit_np_conditional(X, y, {}, rng), NotIdentifiableError);
}

TEST_CASE("glucose confidence falls back below the threshold") {
  Rng rng(11);
  GlucoseMdp mdp;
  std::vector<GlucoseObservation> data;
  GlucoseState s = mdp.initial_state(rng);
  for (int i = 0; i < 30; ++i) {
    const int a = i % 2;
    const auto tr = glucose_step(mdp, s, a, rng);
    data.push_back({s, a, tr.glucose, tr.next.di1, tr.next.ex1});
    s = tr.next;
  }
  const auto c = fit_glucose_confidence(data, GlucoseEstimator::Ar2Np, {}, rng);
  CHECK(c.fell_back());
  CHECK(c.used == GlucoseEstimator::Ar2Linear);
  for (int i = 0; i < 40; ++i) {
    const int a = i % 2;
    const auto tr = glucose_step(mdp, s, a, rng);
    data.push_back({s, a, tr.glucose, tr.next.di1, tr.next.ex1});
    s = tr.next;
  }
  const auto d = fit_glucose_confidence(data, GlucoseEstimator::Ar2Np, {}, rng);
  CHECK_FALSE(d.fell_back());
  const auto model = d.sample_model(rng);
  CHECK(std::isfinite(model.next_glucose(s, 1, rng)));
}

}
