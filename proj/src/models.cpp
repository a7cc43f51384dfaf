#include "pe/models.hpp"

#include <cmath>
#include <limits>

namespace pe {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Solves the (possibly singular) normal equations from sufficient
// statistics. Rank is decided from the eigenvalues of X'X.
LinearFit solve_normal_equations(const Eigen::MatrixXd& xtx,
                                 const Eigen::VectorXd& xty, double yty,
                                 std::size_t n, double ridge) {
  const auto p = xtx.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(xtx);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const Eigen::MatrixXd& V = eig.eigenvectors();
  const double top = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < p; ++i) {
    if (lambda(i) > 1e-10 * top) ++rank;
  }

  LinearFit fit;
  fit.n = n;
  fit.rank = rank;
  fit.ridge = rank < static_cast<std::size_t>(p);

  Eigen::VectorXd inv(p);   // 1 / (lambda + ridge)
  Eigen::VectorXd gain(p);  // lambda / (lambda + ridge)^2
  for (Eigen::Index i = 0; i < p; ++i) {
    const double l = std::max(lambda(i), 0.0);
    if (fit.ridge) {
      inv(i) = 1.0 / (l + ridge);
      gain(i) = l * inv(i) * inv(i);
    } else {
      inv(i) = 1.0 / l;
      gain(i) = inv(i);
    }
  }
  fit.coef = V * inv.asDiagonal() * (V.transpose() * xty);

  const double rss = std::max(
      0.0, yty - 2.0 * fit.coef.dot(xty) + fit.coef.dot(xtx * fit.coef));
  const double df = static_cast<double>(n) - static_cast<double>(rank);
  fit.sigma2 = df > 0.0 ? rss / df : kNaN;
  const double s2 = std::isfinite(fit.sigma2) ? fit.sigma2 : 0.0;
  fit.cov = s2 * (V * gain.asDiagonal() * V.transpose());
  return fit;
}

}  // namespace

double sample_beta(double a, double b, Rng& rng) {
  if (!(a > 0.0 && b > 0.0)) {
    throw PreconditionError("Beta parameters must be positive");
  }
  const double x = std::gamma_distribution<double>(a, 1.0)(rng);
  const double y = std::gamma_distribution<double>(b, 1.0)(rng);
  const double s = x + y;
  if (!(s > 0.0)) return a / (a + b);
  return x / s;
}

double BetaArmPosterior::sample_mean(Rng& rng) const {
  return sample_beta(a, b, rng);
}

double NormalArmPosterior::sample_mean(Rng& rng) const {
  if (!proper()) throw PreconditionError("improper normal-inverse-gamma posterior");
  const double nu = 2.0 * shape;
  const double t = std::student_t_distribution<double>(nu)(rng);
  return m + t * std::sqrt(scale / (shape * kappa));
}

std::pair<double, double> NormalArmPosterior::sample_mean_variance(
    Rng& rng) const {
  if (!proper()) throw PreconditionError("improper normal-inverse-gamma posterior");
  const double g = std::gamma_distribution<double>(shape, 1.0)(rng);
  const double var = scale / g;
  const double mu = m + std::sqrt(var / kappa) * standard_normal(rng);
  return {mu, var};
}

double NormalArmPosterior::expected_variance() const {
  if (!(shape > 1.0)) throw PreconditionError("variance mean needs shape > 1");
  return scale / (shape - 1.0);
}

BetaArmPosterior update_posterior(BetaArmPosterior p, double reward) {
  if (reward != 0.0 && reward != 1.0) {
    throw PreconditionError("Bernoulli rewards must be 0 or 1");
  }
  p.a += reward;
  p.b += 1.0 - reward;
  return p;
}

NormalArmPosterior update_posterior(NormalArmPosterior p, double reward) {
  if (!std::isfinite(reward)) throw PreconditionError("non-finite reward");
  const double k1 = p.kappa + 1.0;
  const double d = reward - p.m;
  p.scale += p.kappa * d * d / (2.0 * k1);
  p.m = (p.kappa * p.m + reward) / k1;
  p.kappa = k1;
  p.shape += 0.5;
  return p;
}

double LinearFit::predict(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(coef.size())) {
    throw PreconditionError("feature dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += coef(static_cast<Eigen::Index>(i)) * x[i];
  return s;
}

LinearFit fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  double ridge) {
  if (X.rows() != y.size()) throw PreconditionError("X and y row mismatch");
  if (X.rows() < X.cols()) {
    throw NotIdentifiableError("fewer observations than coefficients");
  }
  const Eigen::MatrixXd xtx = X.transpose() * X;
  const Eigen::VectorXd xty = X.transpose() * y;
  LinearFit fit = solve_normal_equations(xtx, xty, y.squaredNorm(),
                                         static_cast<std::size_t>(X.rows()),
                                         ridge);
  if (!fit.ridge) {
    // Full rank: take the coefficients from a pivoted QR of X itself, which
    // is far better conditioned than the normal equations.
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    fit.coef = qr.solve(y);
    const double rss = (y - X * fit.coef).squaredNorm();
    const double df = static_cast<double>(X.rows() - X.cols());
    fit.sigma2 = df > 0.0 ? rss / df : 0.0;
    fit.cov = fit.sigma2 * xtx.ldlt().solve(
                               Eigen::MatrixXd::Identity(X.cols(), X.cols()));
  }
  return fit;
}

LinearAccumulator::LinearAccumulator(std::size_t dim)
    : xtx_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim),
                                 static_cast<Eigen::Index>(dim))),
      xty_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))) {}

void LinearAccumulator::add(const Eigen::VectorXd& x, double y) {
  if (x.size() != xty_.size()) throw PreconditionError("feature dimension mismatch");
  xtx_.noalias() += x * x.transpose();
  xty_ += y * x;
  yty_ += y * y;
  ++n_;
}

Eigen::VectorXd LinearAccumulator::coefficients() const {
  if (n_ >= static_cast<std::size_t>(xty_.size())) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx_);
    const auto& d = ldlt.vectorD();
    const double top = std::max(1.0, d.cwiseAbs().maxCoeff());
    if (ldlt.info() == Eigen::Success && d.minCoeff() > 1e-10 * top) {
      return ldlt.solve(xty_);
    }
  }
  return fit().coef;
}

LinearFit LinearAccumulator::fit() const {
  return solve_normal_equations(xtx_, xty_, yty_, n_, kRidgeFallback);
}

ContextModelFit fit_context_model(std::span<const Eigen::VectorXd> contexts) {
  if (contexts.size() < 2) {
    throw NotIdentifiableError("context model needs at least two observations");
  }
  const auto d = contexts.front().size();
  ContextModelFit fit;
  fit.mean = Eigen::VectorXd::Zero(d);
  for (const auto& c : contexts) {
    if (c.size() != d) throw PreconditionError("context dimension mismatch");
    fit.mean += c;
  }
  fit.mean /= static_cast<double>(contexts.size());
  fit.cov = Eigen::MatrixXd::Zero(d, d);
  for (const auto& c : contexts) {
    const Eigen::VectorXd e = c - fit.mean;
    fit.cov += e * e.transpose();
  }
  fit.cov /= static_cast<double>(contexts.size() - 1);
  fit.cov.diagonal().array() += kContextCovRegularizer;
  return fit;
}

Eigen::VectorXd sample_multivariate_normal(const Eigen::VectorXd& mean,
                                           const Eigen::MatrixXd& cov,
                                           Rng& rng) {
  const auto d = mean.size();
  Eigen::VectorXd z(d);
  for (Eigen::Index i = 0; i < d; ++i) z(i) = standard_normal(rng);
  if (cov.isZero(0.0)) return mean;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return mean + eig.eigenvectors() * (root.asDiagonal() * z);
}

}  // namespace pe
