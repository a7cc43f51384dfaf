#include "pe/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pe/core.hpp"

namespace pe {

namespace {

bool feasible(double theta0, double theta1, double theta2, int horizon) {
  return theta0 >= 0.0 && theta0 <= 1.0 && theta1 >= 0.0 &&
         theta1 <= static_cast<double>(horizon) && theta2 >= kTheta2Min &&
         theta2 <= kTheta2Max;
}

double clip(double v, double lo, double hi) {
  if (std::isnan(v)) return lo;
  return std::clamp(v, lo, hi);
}

}  // namespace

Schedule::Schedule(double theta0, double theta1, double theta2, int horizon)
    : theta_{theta0, theta1, theta2}, horizon_(horizon) {
  if (horizon < 1) throw PreconditionError("schedule horizon must be >= 1");
  if (!feasible(theta0, theta1, theta2, horizon)) {
    throw PreconditionError("schedule parameters outside the feasible set: (" +
                            std::to_string(theta0) + ", " +
                            std::to_string(theta1) + ", " +
                            std::to_string(theta2) + ")");
  }
}

double Schedule::operator()(int t) const {
  if (t < 0 || t > horizon_) {
    throw PreconditionError("schedule step " + std::to_string(t) +
                            " outside [0, " + std::to_string(horizon_) + "]");
  }
  const double arg = static_cast<double>(horizon_ - t) - theta_[1];
  return theta_[0] / (1.0 + std::exp(-theta_[2] * arg));
}

double evaluate_schedule(const Schedule& s, int t) { return s(t); }

Schedule clamp_to_feasible(const std::array<double, 3>& raw, int horizon) {
  if (horizon < 1) throw PreconditionError("schedule horizon must be >= 1");
  return Schedule(clip(raw[0], 0.0, 1.0),
                  clip(raw[1], 0.0, static_cast<double>(horizon)),
                  clip(raw[2], kTheta2Min, kTheta2Max), horizon);
}

std::array<double, 3> schedule_lower_bounds(int) {
  return {0.0, 0.0, kTheta2Min};
}

std::array<double, 3> schedule_upper_bounds(int horizon) {
  return {1.0, static_cast<double>(horizon), kTheta2Max};
}

}  // namespace pe
