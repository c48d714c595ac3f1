#pragma once

#include <cstdint>
#include <vector>

#include "mslong/tree.hpp"

namespace mslong {

struct GbtConfig {
  int n_rounds = 100;
  double learning_rate = 0.1;
  int max_leaves = 31;
  int n_bins = 255;
  int min_leaf = 5;
  uint64_t seed = 0;
};

// Histogram gradient-boosted trees with leaf-wise growth: each round fits a
// tree to the residuals, repeatedly splitting the leaf with the best gain
// until max_leaves. Feature values are quantile-binned once per fit.
class GbtModel {
 public:
  void fit(const DataMatrix& X, const std::vector<double>& y, const GbtConfig& cfg);
  double predict_row(const double* x) const;

  // squared-error training loss after each round (non-increasing)
  const std::vector<double>& train_mse_per_round() const { return train_mse_; }
  double base_score() const { return base_score_; }

 private:
  struct Node {
    int feature = -1;   // -1 = leaf
    int bin_split = 0;  // go left if bin <= bin_split
    double threshold = 0.0;  // raw-value split for prediction
    int left = -1, right = -1;
    double value = 0.0;  // leaf output (unscaled mean residual)
  };
  std::vector<std::vector<Node>> rounds_;
  double base_score_ = 0.0;
  double learning_rate_ = 0.1;
  std::vector<double> train_mse_;
};

}  // namespace mslong
