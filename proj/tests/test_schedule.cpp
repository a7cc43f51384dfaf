#include <cmath>
#include <random>

#include "doctest.h"
#include "pe/schedule.hpp"
#include "pe/core.hpp"

using namespace pe;

TEST_SUITE("schedule") {

TEST_CASE("evaluate_schedule examples") {
  CHECK(evaluate_schedule(Schedule(0.2, 10, 0.7, 50), 40) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(std::abs(evaluate_schedule(Schedule(0.2, 10, 0.7, 50), 40) - 0.1) <= 1e-9);
  CHECK(evaluate_schedule(Schedule(0.0, 3, 1.0, 50), 7) == 0.0);

  // Extended-precision evaluation of the logistic form.
  const long double oracle = 1.0L / (1.0L + std::exp(-0.1L * (50.0L - 0.0L - 25.0L)));
  const double got = evaluate_schedule(Schedule(1.0, 25, 0.1, 50), 0);
  CHECK(std::abs(got - static_cast<double>(oracle)) <= 1e-9);
  CHECK(std::abs(got - 0.924142) <= 1e-6);
}

TEST_CASE("random feasible schedules are monotone, bounded, and hit theta0/2 at t = T - theta1") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const int T = 1 + static_cast<int>(u(rng) * 100);
    const double th0 = u(rng);
    const double th1 = u(rng) * T;
    const double th2 = kTheta2Min + u(rng) * (kTheta2Max - kTheta2Min);
    const Schedule s(th0, th1, th2, T);
    double prev = s(0);
    for (int t = 0; t <= T; ++t) {
      const double e = s(t);
      CHECK(e >= 0.0);
      CHECK(e <= th0);
      CHECK(e <= prev + 1e-15);
      prev = e;
    }
    const int mid_t = static_cast<int>(u(rng) * T);
    const Schedule m(th0, static_cast<double>(T - mid_t), th2, T);
    CHECK(std::abs(m(mid_t) - th0 / 2.0) <= 1e-12);
  }
}

TEST_CASE("schedule preconditions") {
  CHECK_THROWS_AS(Schedule(1.1, 0, 1, 10), PreconditionError);
  CHECK_THROWS_AS(Schedule(0.5, 11, 1, 10), PreconditionError);
  CHECK_THROWS_AS(Schedule(0.5, 1, 0.0, 10), PreconditionError);
  CHECK_THROWS_AS(Schedule(0.5, 1, 2.5, 10), PreconditionError);
  CHECK_THROWS_AS(Schedule(0.5, 1, 1, 0), PreconditionError);
  const Schedule s(0.5, 1, 1, 10);
  CHECK_THROWS_AS(evaluate_schedule(s, 11), PreconditionError);
  CHECK_THROWS_AS(evaluate_schedule(s, -1), PreconditionError);
}

TEST_CASE("clamp_to_feasible examples") {
  auto a = clamp_to_feasible({1.5, -3, 0.5}, 50).theta();
  CHECK(a == std::array<double, 3>{1.0, 0.0, 0.5});
  auto b = clamp_to_feasible({0.3, 10, 0.0}, 50).theta();
  CHECK(b == std::array<double, 3>{0.3, 10, kTheta2Min});
  CHECK(kTheta2Min == 1e-6);
  auto c = clamp_to_feasible({0.5, 60, 1.0}, 50).theta();
  CHECK(c == std::array<double, 3>{0.5, 50, 1.0});
  auto d = clamp_to_feasible({std::nan(""), 5, 1.0}, 50).theta();
  CHECK(d[0] == 0.0);
  const Schedule once = clamp_to_feasible({2, 70, 9}, 50);
  CHECK(clamp_to_feasible(once.theta(), 50) == once);
}

}
