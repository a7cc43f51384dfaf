#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pe/core.hpp"
#include "pe/environments.hpp"

namespace pe {

/// Dense row-major feature table.
class Table {
 public:
  Table() = default;
  explicit Table(std::size_t cols) : cols_(cols) {}
  Table(std::size_t cols, std::vector<double> values);

  void append(std::span<const double> row);
  void reserve(std::size_t rows) { values_.reserve(rows * cols_); }

  [[nodiscard]] std::size_t rows() const {
    return cols_ == 0 ? 0 : values_.size() / cols_;
  }
  [[nodiscard]] std::size_t cols() const { return cols_; }
  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * cols_, cols_};
  }
  [[nodiscard]] double operator()(std::size_t i, std::size_t j) const {
    return values_[i * cols_ + j];
  }
  [[nodiscard]] const std::vector<double>& values() const { return values_; }

 private:
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

struct ForestOptions {
  int n_trees = 50;
  int min_leaf = 5;
  int max_depth = 16;
  /// Candidate features per split; 0 means all.
  int max_features = 0;
  bool bootstrap = true;
};

/// Bagged ensemble of variance-reduction (CART) regression trees.
class RegressionForest {
 public:
  /// Fits the ensemble. When `oob` is non-null it receives out-of-bag
  /// predictions (in-sample prediction for rows that were never out of bag).
  static RegressionForest fit(const Table& X, std::span<const double> y,
                              const ForestOptions& options, Rng& rng,
                              std::vector<double>* oob = nullptr);

  [[nodiscard]] double predict(std::span<const double> x) const;
  [[nodiscard]] std::size_t n_trees() const { return roots_.size(); }
  [[nodiscard]] std::size_t n_features() const { return n_features_; }
  [[nodiscard]] bool empty() const { return roots_.empty(); }

 private:
  struct Node {
    int feature;  // -1 for leaves
    double threshold;
    int left;
    int right;
    double value;
  };

  [[nodiscard]] double predict_tree(std::size_t tree,
                                    std::span<const double> x) const;

  std::vector<Node> nodes_;
  std::vector<int> roots_;
  std::size_t n_features_ = 0;
};

RegressionForest fit_regression_forest(const Table& X,
                                       std::span<const double> y,
                                       const ForestOptions& options, Rng& rng);

/// One-step expected reward model over (lagged state, action); the greedy
/// estimator for the glucose MDP.
class RewardModel {
 public:
  RewardModel() = default;
  explicit RewardModel(RegressionForest forest) : forest_(std::move(forest)) {}

  /// Throws PreconditionError if the model was never fitted.
  [[nodiscard]] double predict(const GlucoseState& s, int action) const;
  [[nodiscard]] bool trained() const { return !forest_.empty(); }

 private:
  RegressionForest forest_;
};

/// Fits a RewardModel on rows of `lag_features` (action in column 6).
/// Throws PreconditionError when either action has no samples.
RewardModel fit_reward_model(const Table& features,
                             std::span<const double> rewards,
                             const ForestOptions& options, Rng& rng);

/// Whether both actions appear in column 6 of `features`.
bool has_both_actions(const Table& features);

}  // namespace pe
