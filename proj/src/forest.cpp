#include "pe/forest.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>

namespace pe {

Table::Table(std::size_t cols, std::vector<double> values)
    : cols_(cols), values_(std::move(values)) {
  if (cols_ == 0 || values_.size() % cols_ != 0) {
    throw PreconditionError("table values do not fill whole rows");
  }
}

void Table::append(std::span<const double> row) {
  if (row.size() != cols_) throw PreconditionError("row width mismatch");
  values_.insert(values_.end(), row.begin(), row.end());
}

namespace {

struct BuildNode {
  double w = 0.0;   // weighted count
  double s = 0.0;   // weighted sum of y
  double ss = 0.0;  // weighted sum of y^2
  int depth = 0;
  std::uint64_t features = ~std::uint64_t{0};
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
};

struct ScanState {
  double cw = 0.0;
  double cs = 0.0;
  double last = 0.0;
  bool has_last = false;
  bool on = false;  // node is splittable and may use the current feature
  double w = 0.0;
  double s = 0.0;
  double base = 0.0;  // s^2 / w
  double best_gain = 0.0;
  int best_feature = -1;
  double best_threshold = 0.0;
};

struct SortedEntry {
  double x;
  std::uint32_t row;
};

std::uint64_t sample_feature_mask(std::size_t p, int max_features, Rng& rng) {
  if (max_features <= 0 || static_cast<std::size_t>(max_features) >= p) {
    return ~std::uint64_t{0};
  }
  thread_local std::vector<std::size_t> idx;
  idx.resize(p);
  std::iota(idx.begin(), idx.end(), 0);
  std::uint64_t mask = 0;
  for (int k = 0; k < max_features; ++k) {
    const std::size_t j =
        static_cast<std::size_t>(k) + uniform_index(p - static_cast<std::size_t>(k), rng);
    std::swap(idx[static_cast<std::size_t>(k)], idx[j]);
    mask |= std::uint64_t{1} << idx[static_cast<std::size_t>(k)];
  }
  return mask;
}

}  // namespace

RegressionForest RegressionForest::fit(const Table& X,
                                       std::span<const double> y,
                                       const ForestOptions& options, Rng& rng,
                                       std::vector<double>* oob) {
  const std::size_t n = X.rows();
  const std::size_t p = X.cols();
  if (n == 0) throw PreconditionError("cannot fit a forest without data");
  if (y.size() != n) throw PreconditionError("feature/response row mismatch");
  if (p > 64) throw PreconditionError("at most 64 features are supported");
  if (options.n_trees < 1 || options.min_leaf < 1 || options.max_depth < 0) {
    throw PreconditionError("invalid forest options");
  }

  // Presort once; every tree scans these orders with its own weights.
  std::vector<std::vector<std::uint32_t>> order(p);
  for (std::size_t f = 0; f < p; ++f) {
    auto& o = order[f];
    o.resize(n);
    std::iota(o.begin(), o.end(), 0u);
    std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) {
      return X(a, f) < X(b, f);
    });
  }

  RegressionForest forest;
  forest.n_features_ = p;
  const double min_leaf = static_cast<double>(options.min_leaf);

  std::vector<double> weight(n);
  std::vector<int> node_of(n);
  // Per-tree sorted orders restricted to rows still in splittable nodes.
  std::vector<std::vector<SortedEntry>> live(p);
  std::vector<double> wy(n);
  std::vector<BuildNode> nodes;
  std::vector<ScanState> scan;
  std::vector<int> frontier, next_frontier;
  std::vector<double> oob_sum, oob_count;
  if (oob) {
    oob_sum.assign(n, 0.0);
    oob_count.assign(n, 0.0);
  }

  for (int tree = 0; tree < options.n_trees; ++tree) {
    if (options.bootstrap) {
      std::fill(weight.begin(), weight.end(), 0.0);
      for (std::size_t k = 0; k < n; ++k) weight[uniform_index(n, rng)] += 1.0;
    } else {
      std::fill(weight.begin(), weight.end(), 1.0);
    }

    nodes.clear();
    nodes.emplace_back();
    for (std::size_t i = 0; i < n; ++i) {
      if (weight[i] > 0.0) {
        node_of[i] = 0;
        nodes[0].w += weight[i];
        nodes[0].s += weight[i] * y[i];
        nodes[0].ss += weight[i] * y[i] * y[i];
      } else {
        node_of[i] = -1;
      }
    }
    nodes[0].features = sample_feature_mask(p, options.max_features, rng);
    frontier.assign(1, 0);
    for (std::size_t i = 0; i < n; ++i) wy[i] = weight[i] * y[i];
    for (std::size_t f = 0; f < p; ++f) {
      live[f].clear();
      for (std::uint32_t i : order[f]) {
        if (node_of[i] >= 0) live[f].push_back({X(i, f), i});
      }
    }

    while (!frontier.empty()) {
      scan.assign(nodes.size(), ScanState{});
      std::vector<char> active(nodes.size(), 0);
      bool any_active = false;
      for (int id : frontier) {
        const BuildNode& nd = nodes[static_cast<std::size_t>(id)];
        const double sse = nd.ss - nd.s * nd.s / nd.w;
        if (nd.depth < options.max_depth && nd.w >= 2.0 * min_leaf &&
            sse > 1e-12 * std::max(1.0, nd.ss)) {
          active[static_cast<std::size_t>(id)] = 1;
          any_active = true;
        }
      }
      if (!any_active) break;

      for (int id : frontier) {
        const BuildNode& nd = nodes[static_cast<std::size_t>(id)];
        ScanState& st = scan[static_cast<std::size_t>(id)];
        st.w = nd.w;
        st.s = nd.s;
        st.base = nd.s * nd.s / nd.w;
      }
      for (std::size_t f = 0; f < p; ++f) {
        const std::uint64_t bit = std::uint64_t{1} << f;
        for (int id : frontier) {
          ScanState& st = scan[static_cast<std::size_t>(id)];
          st.cw = st.cs = 0.0;
          st.has_last = false;
          st.on = active[static_cast<std::size_t>(id)] &&
                  (nodes[static_cast<std::size_t>(id)].features & bit);
        }
        for (const SortedEntry& e : live[f]) {
          ScanState& st = scan[static_cast<std::size_t>(node_of[e.row])];
          if (!st.on) continue;
          if (st.has_last && e.x > st.last) {
            const double wr = st.w - st.cw;
            if (st.cw >= min_leaf && wr >= min_leaf) {
              const double sr = st.s - st.cs;
              const double gain = st.cs * st.cs / st.cw + sr * sr / wr - st.base;
              if (gain > st.best_gain) {
                st.best_gain = gain;
                st.best_feature = static_cast<int>(f);
                st.best_threshold = 0.5 * (st.last + e.x);
              }
            }
          }
          st.cw += weight[e.row];
          st.cs += wy[e.row];
          st.last = e.x;
          st.has_last = true;
        }
      }

      next_frontier.clear();
      for (int id : frontier) {
        const ScanState& st = scan[static_cast<std::size_t>(id)];
        if (!active[static_cast<std::size_t>(id)] || st.best_feature < 0 ||
            st.best_gain <= 1e-12 * std::max(1.0, nodes[static_cast<std::size_t>(id)].ss)) {
          continue;
        }
        const int depth = nodes[static_cast<std::size_t>(id)].depth + 1;
        const int left = static_cast<int>(nodes.size());
        nodes.emplace_back();
        nodes.emplace_back();
        BuildNode& nd = nodes[static_cast<std::size_t>(id)];
        nd.feature = st.best_feature;
        nd.threshold = st.best_threshold;
        nd.left = left;
        nd.right = left + 1;
        for (int c : {left, left + 1}) {
          nodes[static_cast<std::size_t>(c)].depth = depth;
          nodes[static_cast<std::size_t>(c)].features =
              sample_feature_mask(p, options.max_features, rng);
          next_frontier.push_back(c);
        }
      }
      if (next_frontier.empty()) break;

      const int first_new = next_frontier.front();
      for (const SortedEntry& e : live[0]) {
        const std::uint32_t i = e.row;
        const int id = node_of[i];
        const BuildNode& nd = nodes[static_cast<std::size_t>(id)];
        if (nd.left < 0) continue;
        const int child = X(i, static_cast<std::size_t>(nd.feature)) <= nd.threshold
                              ? nd.left
                              : nd.right;
        node_of[i] = child;
        BuildNode& c = nodes[static_cast<std::size_t>(child)];
        c.w += weight[i];
        c.s += weight[i] * y[i];
        c.ss += weight[i] * y[i] * y[i];
      }
      for (auto& l : live) {
        std::erase_if(l, [&](const SortedEntry& e) { return node_of[e.row] < first_new; });
      }
      frontier.swap(next_frontier);
    }

    const int offset = static_cast<int>(forest.nodes_.size());
    forest.roots_.push_back(offset);
    for (const BuildNode& nd : nodes) {
      Node out{};
      out.feature = nd.left < 0 ? -1 : nd.feature;
      out.threshold = nd.threshold;
      out.left = nd.left < 0 ? -1 : nd.left + offset;
      out.right = nd.right < 0 ? -1 : nd.right + offset;
      out.value = nd.w > 0.0 ? nd.s / nd.w : 0.0;
      forest.nodes_.push_back(out);
    }

    if (oob) {
      const std::size_t t = forest.roots_.size() - 1;
      for (std::size_t i = 0; i < n; ++i) {
        if (weight[i] == 0.0) {
          oob_sum[i] += forest.predict_tree(t, X.row(i));
          oob_count[i] += 1.0;
        }
      }
    }
  }

  if (oob) {
    oob->resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      (*oob)[i] = oob_count[i] > 0.0 ? oob_sum[i] / oob_count[i]
                                     : forest.predict(X.row(i));
    }
  }
  return forest;
}

double RegressionForest::predict_tree(std::size_t tree,
                                      std::span<const double> x) const {
  int id = roots_[tree];
  while (true) {
    const Node& nd = nodes_[static_cast<std::size_t>(id)];
    if (nd.feature < 0) return nd.value;
    id = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
  }
}

double RegressionForest::predict(std::span<const double> x) const {
  if (roots_.empty()) throw PreconditionError("forest is not fitted");
  if (x.size() != n_features_) throw PreconditionError("feature dimension mismatch");
  double s = 0.0;
  for (std::size_t t = 0; t < roots_.size(); ++t) s += predict_tree(t, x);
  return s / static_cast<double>(roots_.size());
}

RegressionForest fit_regression_forest(const Table& X,
                                       std::span<const double> y,
                                       const ForestOptions& options, Rng& rng) {
  return RegressionForest::fit(X, y, options, rng);
}

double RewardModel::predict(const GlucoseState& s, int action) const {
  if (!trained()) throw PreconditionError("reward model is not trained");
  const auto x = lag_features(s, action);
  return forest_.predict(x);
}

bool has_both_actions(const Table& features) {
  bool seen0 = false, seen1 = false;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    if (features(i, 6) == 0.0) seen0 = true;
    else seen1 = true;
    if (seen0 && seen1) return true;
  }
  return false;
}

RewardModel fit_reward_model(const Table& features,
                             std::span<const double> rewards,
                             const ForestOptions& options, Rng& rng) {
  if (features.cols() != kLagFeatures) {
    throw PreconditionError("reward model expects lag features");
  }
  if (!has_both_actions(features)) {
    throw NotIdentifiableError("reward model needs samples of both actions");
  }
  return RewardModel(fit_regression_forest(features, rewards, options, rng));
}

}  // namespace pe
