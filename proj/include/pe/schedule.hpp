#pragma once

#include <array>

namespace pe {

inline constexpr double kTheta2Min = 1e-6;
inline constexpr double kTheta2Max = 2.0;

/// Logistic exploration schedule
///
///   eta(T, t, theta) = theta0 / (1 + exp(-theta2 * (T - t - theta1)))
///
/// over the feasible box theta0 in [0, 1], theta1 in [0, T],
/// theta2 in [kTheta2Min, kTheta2Max]. Every feasible schedule is
/// nonincreasing in t and bounded by theta0.
class Schedule {
 public:
  /// Throws PreconditionError if theta lies outside the feasible box or
  /// horizon < 1.
  Schedule(double theta0, double theta1, double theta2, int horizon);

  /// Exploration level at step t. Valid for 0 <= t <= horizon; t = 0 is the
  /// pre-loop bookkeeping index.
  [[nodiscard]] double operator()(int t) const;

  [[nodiscard]] double theta0() const { return theta_[0]; }
  [[nodiscard]] double theta1() const { return theta_[1]; }
  [[nodiscard]] double theta2() const { return theta_[2]; }
  [[nodiscard]] const std::array<double, 3>& theta() const { return theta_; }
  [[nodiscard]] int horizon() const { return horizon_; }

  friend bool operator==(const Schedule&, const Schedule&) = default;

 private:
  std::array<double, 3> theta_;
  int horizon_;
};

double evaluate_schedule(const Schedule& s, int t);

/// Clips each coordinate into its feasible interval. NaN coordinates map to
/// the lower bound. Total and idempotent.
Schedule clamp_to_feasible(const std::array<double, 3>& raw, int horizon);

/// Lower and upper corners of the feasible box for a given horizon.
std::array<double, 3> schedule_lower_bounds(int horizon);
std::array<double, 3> schedule_upper_bounds(int horizon);

}  // namespace pe
