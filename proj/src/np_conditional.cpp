#include "pe/np_conditional.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace pe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Held-out rows scored per CV pass; larger samples are subsampled.
constexpr std::size_t kCvMaxPoints = 500;

double log_sum_exp(std::span<const double> v) {
  double m = -kInf;
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double sample_sd(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (n - 1.0));
}

}  // namespace

NpConditionalFit::NpConditionalFit(RegressionForest mean, Table covariates,
                                   std::vector<double> residuals,
                                   std::vector<double> covariate_bandwidths,
                                   double residual_bandwidth)
    : mean_(std::make_shared<const RegressionForest>(std::move(mean))),
      covariates_(std::make_shared<const Table>(std::move(covariates))),
      residuals_(std::make_shared<const std::vector<double>>(std::move(residuals))),
      hx_(std::move(covariate_bandwidths)),
      hr_(residual_bandwidth) {
  if (mean_->empty()) throw PreconditionError("conditional mean is not fitted");
  if (residuals_->empty() || residuals_->size() != covariates_->rows()) {
    throw PreconditionError("one residual per covariate row is required");
  }
  if (hx_.size() != covariates_->cols() || mean_->n_features() != hx_.size()) {
    throw PreconditionError("bandwidth/covariate dimension mismatch");
  }
  for (double h : hx_) {
    if (!(h > 0.0)) throw PreconditionError("covariate bandwidths must be positive");
  }
  if (!(hr_ >= 0.0) || !std::isfinite(hr_)) {
    throw PreconditionError("residual bandwidth must be finite and nonnegative");
  }
}

double NpConditionalFit::predict(std::span<const double> x) const {
  return mean_->predict(x);
}

std::vector<double> NpConditionalFit::weights(std::span<const double> x) const {
  const Table& X = *covariates_;
  if (x.size() != X.cols()) throw PreconditionError("feature dimension mismatch");
  const std::size_t n = X.rows();
  std::vector<double> w(n, 0.0);
  double top = -kInf;
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < X.cols(); ++j) {
      if (std::isinf(hx_[j])) continue;
      const double u = (x[j] - X(i, j)) / hx_[j];
      d += u * u;
    }
    w[i] = -0.5 * d;
    top = std::max(top, w[i]);
  }
  double s = 0.0;
  for (double& v : w) {
    v = std::exp(v - top);
    s += v;
  }
  for (double& v : w) v /= s;
  return w;
}

double NpConditionalFit::sample(std::span<const double> x, Rng& rng) const {
  const std::vector<double> w = weights(x);
  const std::vector<double>& r = *residuals_;
  const double u = uniform01(rng);
  const double z = standard_normal(rng);
  double acc = 0.0;
  std::size_t pick = r.size() - 1;
  for (std::size_t i = 0; i < r.size(); ++i) {
    acc += w[i];
    if (u < acc) {
      pick = i;
      break;
    }
  }
  return predict(x) + r[pick] + hr_ * z;
}

NpConditionalFit fit_np_conditional(const Table& X, std::span<const double> y,
                                    const NpOptions& options, Rng& rng) {
  const std::size_t n = X.rows();
  const std::size_t p = X.cols();
  if (y.size() != n) throw PreconditionError("feature/response row mismatch");
  if (n < NpConditionalFit::kMinTransitions) {
    throw NotIdentifiableError("nonparametric model needs at least 50 transitions");
  }
  if (options.cv_folds < 2 || options.grid_points < 1 ||
      !(options.grid_min > 0.0 && options.grid_max >= options.grid_min)) {
    throw PreconditionError("invalid cross-validation options");
  }

  std::vector<double> oob;
  RegressionForest forest = RegressionForest::fit(X, y, options.forest, rng, &oob);
  std::vector<double> resid(n);
  for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - oob[i];
  const double mean_resid = std::accumulate(resid.begin(), resid.end(), 0.0) /
                            static_cast<double>(n);
  for (double& r : resid) r -= mean_resid;

  // Normal-reference bandwidths for the joint (covariates, residual) density.
  std::vector<double> base(p, kInf);
  std::size_t active = 0;
  std::vector<double> col(n);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = X(i, j);
    const double sd = sample_sd(col);
    if (sd > 0.0) {
      base[j] = sd;
      ++active;
    }
  }
  const double rate =
      std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(active) + 5.0));
  for (double& b : base) {
    if (std::isfinite(b)) b *= 1.06 * rate;
  }
  const double hr0 = 1.06 * sample_sd(resid) * rate;

  // Grid of multipliers, log-spaced.
  const int g = options.grid_points;
  std::vector<double> grid(static_cast<std::size_t>(g));
  for (int k = 0; k < g; ++k) {
    const double f = g == 1 ? 0.5 : static_cast<double>(k) / (g - 1);
    grid[static_cast<std::size_t>(k)] =
        options.grid_min * std::pow(options.grid_max / options.grid_min, f);
  }
  const bool tune_x = active > 0;
  const bool tune_r = hr0 > 0.0;
  const std::vector<double> one{1.0};
  const std::vector<double>& gx = tune_x ? grid : one;
  const std::vector<double>& gr = tune_r ? grid : one;

  double best_cx = 1.0, best_cr = 1.0;
  if (tune_x || tune_r) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> fold(n);
    for (std::size_t k = 0; k < n; ++k) {
      fold[perm[k]] = static_cast<int>(k % static_cast<std::size_t>(options.cv_folds));
    }
    const std::size_t n_eval = std::min(n, kCvMaxPoints);

    std::vector<double> score(gx.size() * gr.size(), 0.0);
    std::vector<double> dist, err, a, b;
    dist.reserve(n);
    err.reserve(n);
    for (std::size_t e = 0; e < n_eval; ++e) {
      const std::size_t i = perm[e];
      dist.clear();
      err.clear();
      for (std::size_t j = 0; j < n; ++j) {
        if (fold[j] == fold[i]) continue;
        double d = 0.0;
        for (std::size_t c = 0; c < p; ++c) {
          if (std::isinf(base[c])) continue;
          const double u = (X(i, c) - X(j, c)) / base[c];
          d += u * u;
        }
        dist.push_back(d);
        const double v = tune_r ? (resid[i] - resid[j]) / hr0 : 0.0;
        err.push_back(v * v);
      }
      a.resize(dist.size());
      b.resize(dist.size());
      for (std::size_t ix = 0; ix < gx.size(); ++ix) {
        const double cx2 = gx[ix] * gx[ix];
        for (std::size_t j = 0; j < dist.size(); ++j) a[j] = -0.5 * dist[j] / cx2;
        const double denom = log_sum_exp(a);
        for (std::size_t ir = 0; ir < gr.size(); ++ir) {
          const double cr2 = gr[ir] * gr[ir];
          for (std::size_t j = 0; j < dist.size(); ++j) b[j] = a[j] - 0.5 * err[j] / cr2;
          score[ix * gr.size() + ir] += log_sum_exp(b) - denom - std::log(gr[ir]);
        }
      }
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < score.size(); ++k) {
      if (score[k] > score[best]) best = k;
    }
    best_cx = gx[best / gr.size()];
    best_cr = gr[best % gr.size()];
  }

  std::vector<double> hx(p);
  for (std::size_t j = 0; j < p; ++j) hx[j] = std::isinf(base[j]) ? kInf : base[j] * best_cx;
  const double hr = tune_r ? hr0 * best_cr : 0.0;
  return NpConditionalFit(std::move(forest), X, std::move(resid), std::move(hx), hr);
}

double np_sample_next_glucose(const NpConditionalFit& fit,
                              std::span<const double> features, Rng& rng) {
  return fit.sample(features, rng);
}

}  // namespace pe
