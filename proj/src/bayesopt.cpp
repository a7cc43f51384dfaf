#include "pe/bayesopt.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace pe {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double matern52(double r, double ell) {
  const double s = std::sqrt(5.0) * r / ell;
  return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

double distance(const Eigen::MatrixXd& X, Eigen::Index i,
                std::span<const double> x) {
  double d = 0.0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double u = X(i, j) - x[static_cast<std::size_t>(j)];
    d += u * u;
  }
  return std::sqrt(d);
}

double radical_inverse(std::uint64_t i, std::uint64_t base) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

constexpr std::array<std::uint64_t, 16> kPrimes{2,  3,  5,  7,  11, 13, 17, 19,
                                                23, 29, 31, 37, 41, 43, 47, 53};

}  // namespace

GpSurrogate gp_fit(const Eigen::MatrixXd& X, std::span<const double> y,
                   const GpOptions& options) {
  const Eigen::Index n = X.rows();
  if (static_cast<std::size_t>(n) != y.size()) {
    throw PreconditionError("one target per input row is required");
  }
  if (X.cols() < 1) throw PreconditionError("inputs need at least one dimension");
  bool distinct = false;
  for (Eigen::Index i = 1; i < n && !distinct; ++i) {
    if (X.row(i) != X.row(0)) distinct = true;
  }
  if (!distinct) throw PreconditionError("GP fit needs at least two distinct inputs");
  if (options.length_scales.empty() || options.noise_ratios.empty()) {
    throw PreconditionError("empty hyperparameter grid");
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw PreconditionError("non-finite GP target");
  }

  GpSurrogate g;
  g.X_ = X;
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  g.y_mean_ = mean;
  g.y_scale_ = var > 0.0 ? std::sqrt(var) : 1.0;
  Eigen::VectorXd ys(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ys(i) = (y[static_cast<std::size_t>(i)] - mean) / g.y_scale_;
  }

  Eigen::MatrixXd D(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) D(i, j) = (X.row(i) - X.row(j)).norm();
  }

  double best = kNegInf;
  bool found = false;
  Eigen::MatrixXd K(n, n);
  for (double ell : options.length_scales) {
    if (!(ell > 0.0)) throw PreconditionError("length scales must be positive");
    for (double ratio : options.noise_ratios) {
      if (!(ratio >= 0.0)) throw PreconditionError("noise ratios must be >= 0");
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) K(i, j) = matern52(D(i, j), ell);
        K(i, i) += ratio + options.jitter;
      }
      Eigen::LLT<Eigen::MatrixXd> llt(K);
      if (llt.info() != Eigen::Success) continue;
      const Eigen::VectorXd alpha = llt.solve(ys);
      const double quad = ys.dot(alpha);
      const double signal = std::max(quad / static_cast<double>(n), 1e-12);
      double logdet = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        logdet += std::log(llt.matrixLLT()(i, i));
      }
      const double ll = -0.5 * static_cast<double>(n) * std::log(signal) -
                        logdet - 0.5 * quad / signal;
      if (!found || ll > best) {
        found = true;
        best = ll;
        g.chol_ = llt;
        g.alpha_ = alpha;
        g.length_scale_ = ell;
        g.noise_ratio_ = ratio;
        g.signal_ = signal;
      }
    }
  }
  if (!found) throw PreconditionError("kernel matrix is not positive definite");
  return g;
}

std::pair<double, double> gp_predict(const GpSurrogate& g,
                                     std::span<const double> x) {
  if (x.size() != g.dimension()) throw PreconditionError("input dimension mismatch");
  for (double v : x) {
    if (!(v >= -1e-12 && v <= 1.0 + 1e-12)) {
      throw PreconditionError("prediction point outside the unit cube");
    }
  }
  const Eigen::Index n = g.X_.rows();
  Eigen::VectorXd k(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i) = matern52(distance(g.X_, i, x), g.length_scale_);
  }
  const double mean = g.y_mean_ + g.y_scale_ * k.dot(g.alpha_);
  const Eigen::VectorXd v = g.chol_.matrixL().solve(k);
  const double reduction = v.squaredNorm();
  const double var =
      g.signal_ * g.y_scale_ * g.y_scale_ * std::max(0.0, 1.0 - reduction);
  return {mean, var};
}

double expected_improvement(double mean, double variance, double best) {
  if (!(variance >= 0.0)) throw PreconditionError("variance must be >= 0");
  const double gap = best - mean;
  const double sd = std::sqrt(variance);
  if (!(sd > 0.0)) return std::max(gap, 0.0);
  const double z = gap / sd;
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return std::max(0.0, gap * cdf + sd * pdf);
}

MinimizeResult minimize(const Objective& objective,
                        std::span<const double> lower,
                        std::span<const double> upper,
                        const MinimizeOptions& options, Rng& rng) {
  const std::size_t d = lower.size();
  if (d == 0 || upper.size() != d) throw PreconditionError("bounds dimension mismatch");
  if (options.initial_design < 2 || options.budget < options.initial_design) {
    throw PreconditionError("budget must cover an initial design of >= 2 points");
  }
  if (options.candidates < 1 || options.local_candidates < 0) {
    throw PreconditionError("invalid candidate counts");
  }
  std::vector<std::size_t> free;
  for (std::size_t j = 0; j < d; ++j) {
    if (!(std::isfinite(lower[j]) && std::isfinite(upper[j]) && lower[j] <= upper[j])) {
      throw PreconditionError("invalid box bounds");
    }
    if (upper[j] > lower[j]) free.push_back(j);
  }
  if (free.size() > kPrimes.size()) throw PreconditionError("too many dimensions");

  const auto to_box = [&](std::span<const double> u) {
    std::vector<double> x(lower.begin(), lower.end());
    for (std::size_t k = 0; k < free.size(); ++k) {
      const std::size_t j = free[k];
      x[j] = std::clamp(lower[j] + u[k] * (upper[j] - lower[j]), lower[j], upper[j]);
    }
    return x;
  };

  MinimizeResult result;
  const auto evaluate = [&](const std::vector<double>& x) {
    result.evaluated_x.push_back(x);
    result.evaluated_y.push_back(objective(x));
  };

  if (free.empty()) {
    const std::vector<double> x(lower.begin(), lower.end());
    evaluate(x);
    result.x = x;
    result.estimated_minimum = result.evaluated_y.front();
    return result;
  }

  const std::size_t q = free.size();
  std::vector<std::vector<double>> units;

  // Randomly shifted Halton design.
  std::vector<double> shift(q);
  for (double& s : shift) s = uniform01(rng);
  for (int i = 0; i < options.initial_design; ++i) {
    std::vector<double> u(q);
    for (std::size_t k = 0; k < q; ++k) {
      double v = radical_inverse(static_cast<std::uint64_t>(i) + 1, kPrimes[k]) + shift[k];
      u[k] = v - std::floor(v);
    }
    units.push_back(u);
    evaluate(to_box(u));
  }

  const auto fit = [&]() {
    std::vector<double> y = result.evaluated_y;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double v : y) {
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    const double penalty = std::isfinite(hi) ? hi + std::max(1.0, hi - lo) : 0.0;
    for (double& v : y) {
      if (!std::isfinite(v)) v = penalty;
    }
    Eigen::MatrixXd X(static_cast<Eigen::Index>(units.size()), static_cast<Eigen::Index>(q));
    for (std::size_t i = 0; i < units.size(); ++i) {
      for (std::size_t k = 0; k < q; ++k) {
        X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = units[i][k];
      }
    }
    return gp_fit(X, y, options.gp);
  };

  const auto incumbent = [&](const GpSurrogate& g) {
    std::size_t best = 0;
    double best_mean = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < units.size(); ++i) {
      const double m = gp_predict(g, units[i]).first;
      if (m < best_mean) {
        best_mean = m;
        best = i;
      }
    }
    return std::pair{best, best_mean};
  };

  std::vector<double> u(q);
  while (static_cast<int>(units.size()) < options.budget) {
    const GpSurrogate g = fit();
    const auto [inc, inc_mean] = incumbent(g);
    double best_ei = -1.0;
    std::vector<double> best_u;
    const int total = options.candidates + options.local_candidates;
    for (int c = 0; c < total; ++c) {
      if (c < options.candidates) {
        for (double& v : u) v = uniform01(rng);
      } else {
        for (std::size_t k = 0; k < q; ++k) {
          u[k] = std::clamp(units[inc][k] + options.local_step * standard_normal(rng),
                            0.0, 1.0);
        }
      }
      const auto [m, v] = gp_predict(g, u);
      const double ei = expected_improvement(m, v, inc_mean);
      if (ei > best_ei) {
        best_ei = ei;
        best_u = u;
      }
    }
    units.push_back(best_u);
    evaluate(to_box(best_u));
  }

  const GpSurrogate g = fit();
  const auto [inc, inc_mean] = incumbent(g);
  result.x = result.evaluated_x[inc];
  result.estimated_minimum = inc_mean;
  return result;
}

}  // namespace pe
