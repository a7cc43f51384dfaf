#include <cmath>

#include "doctest.h"
#include "pe/environments.hpp"

using namespace pe;

TEST_SUITE("environments") {

TEST_CASE("degenerate Bernoulli arms") {
  BernoulliMab env({1.0, 0.0});
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    CHECK(env.pull(0, rng) == 1.0);
    CHECK(env.pull(1, rng) == 0.0);
  }
  CHECK_THROWS_AS(env.pull(2, rng), std::out_of_range);
  CHECK_THROWS_AS(BernoulliMab({0.5, 1.5}), PreconditionError);
}

TEST_CASE("vanishing Gaussian noise returns the mean") {
  GaussianMab env({0.5, 0.2}, 1e-15);
  Rng rng(2);
  CHECK(std::abs(env.pull(0, rng) - 0.5) <= 1e-9);
  CHECK_THROWS_AS(env.pull(5, rng), std::out_of_range);
}

TEST_CASE("optimal means") {
  CHECK(BernoulliMab({0.3, 0.7}).optimal_mean() == 0.7);
  CHECK(GaussianMab({0.1, 0.9, 0.5}, 1.0).optimal_mean() == 0.9);

  const auto env = LinearContextualBandit::defaults();
  Eigen::VectorXd x(3);
  x << 1, 0, 0;
  const double s0 = 1 * 0.4 + 0 * 0.2 + 0 * -0.2;
  const double s1 = 1 * 0.2 + 0 * 0.5 + 0 * 0.2;
  CHECK(env.optimal_mean(x) == doctest::Approx(std::max(s0, s1)));
  CHECK(env.optimal_mean(x) == doctest::Approx(0.4));
  CHECK(env.optimal_arm(x) == 0);
  const std::vector<double> xv{1, 0, 0};
  CHECK(optimal_mean(env, xv) == doctest::Approx(0.4));
  CHECK_THROWS_AS(optimal_mean(env, std::span<const double>{}), PreconditionError);
}

TEST_CASE("contextual draws have intercept and requested moments") {
  const auto env = LinearContextualBandit::defaults();
  Rng rng(3);
  double s1 = 0, s2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto x = env.draw_context(rng);
    CHECK(x(0) == 1.0);
    s1 += x(1);
    s2 += x(1) * x(1);
  }
  CHECK(std::abs(s1 / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1.0) < 0.05);
}

TEST_CASE("glucose reward branches") {
  const auto lower = [](double g) { return -0.005 * g * g + 0.95 * g - 45.0; };
  const auto upper = [](double g) { return -0.0002 * g * g + 0.022 * g - 0.5; };
  CHECK(glucose_reward(70) == doctest::Approx(upper(70)));
  CHECK(glucose_reward(70) == doctest::Approx(0.06));
  CHECK(glucose_reward(50) == doctest::Approx(lower(50)));
  CHECK(glucose_reward(50) == doctest::Approx(-10.0));
  CHECK(glucose_reward(100) == doctest::Approx(upper(100)));
  CHECK(glucose_reward(100) == doctest::Approx(-0.3));
  CHECK_THROWS_AS(glucose_reward(std::nan("")), PreconditionError);
}

TEST_CASE("glucose dynamics") {
  GlucoseMdp mdp;
  GlucoseState s;
  s.gl1 = s.gl2 = 100;
  const auto& b = mdp.beta;
  const double m0 = b[0] + b[1] * 100 + b[4] * 100;
  CHECK(mdp.next_glucose_mean(s, 0) == doctest::Approx(m0));
  CHECK(mdp.next_glucose_mean(s, 0) == doctest::Approx(100.0));
  CHECK(mdp.next_glucose_mean(s, 1) == doctest::Approx(m0 + b[7]));
  CHECK(mdp.next_glucose_mean(s, 1) == doctest::Approx(90.0));

  GlucoseMdp zero;
  zero.covariate_prob = 0.0;
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    CHECK(zero.draw_diet(rng) == 0.0);
    CHECK(zero.draw_exercise(rng) == 0.0);
  }

  const auto tr = glucose_step(mdp, s, 1, rng);
  CHECK(tr.next.gl2 == 100.0);
  CHECK(tr.next.gl1 == tr.glucose);
  CHECK(tr.next.a_prev == 1);
  CHECK(tr.reward == doctest::Approx(glucose_reward(tr.glucose)));

  GlucoseMdp bad;
  bad.covariate_prob = 1.5;
  CHECK_THROWS_AS(bad.validate(), PreconditionError);
}

TEST_CASE("feature layouts") {
  GlucoseState s{1, 2, 3, 4, 5, 6, 1};
  const auto f = ar2_features(s, 0);
  CHECK(f == std::array<double, 9>{1, 1, 2, 3, 4, 5, 6, 0, 1});
  const auto g = ar1_features(s, 1);
  CHECK(g == std::array<double, 5>{1, 1, 2, 3, 1});
  const auto l = lag_features(s, 1);
  CHECK(l == std::array<double, 8>{1, 2, 3, 4, 5, 6, 1, 1});
  const auto n = advance_state(s, 1, 7, 8, 9);
  CHECK(n.gl1 == 7);
  CHECK(n.di1 == 8);
  CHECK(n.ex1 == 9);
  CHECK(n.gl2 == 1);
  CHECK(n.di2 == 2);
  CHECK(n.ex2 == 3);
  CHECK(n.a_prev == 1);
}

}
