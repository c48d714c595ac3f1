#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mslong/errors.hpp"
#include "mslong/rng.hpp"

namespace mslong {

// Column-major numeric matrix; the tree and predictor code paths share it.
struct DataMatrix {
  int n = 0;
  int p = 0;
  std::vector<double> data;  // column-major, n*p

  void resize(int rows, int cols) {
    n = rows;
    p = cols;
    data.assign(static_cast<size_t>(rows) * cols, 0.0);
  }
  double at(int r, int c) const { return data[static_cast<size_t>(c) * n + r]; }
  double& at(int r, int c) { return data[static_cast<size_t>(c) * n + r]; }
  const double* col(int c) const { return data.data() + static_cast<size_t>(c) * n; }
};

struct TreeConfig {
  int min_leaf = 5;
  int max_features = 0;  // 0 = scan all features; otherwise sample per node
};

// Per-feature row orders of a full matrix, sorted by value with row-index
// tie-break. Computed once and shared by every tree grown on the same data.
struct FeatureOrders {
  std::vector<std::vector<int>> order;  // one permutation of 0..n-1 per feature
  static FeatureOrders build(const DataMatrix& X);
};

// Quantile binning of a feature matrix (shared by the histogram tree paths).
// A value v falls in bin b iff v <= edges[b] for the first such b.
struct QuantileBins {
  std::vector<std::vector<double>> edges;     // per feature, ascending
  std::vector<std::vector<uint16_t>> codes;   // per feature, per row
  static QuantileBins build(const DataMatrix& X, int n_bins);
  int bin_of(int feature, double v) const;
  int n_bins(int feature) const { return static_cast<int>(edges[feature].size()) + 1; }
};

// Variance-reducing regression tree with exact splits at midpoints between
// sorted distinct values. Ties in gain break toward the lowest feature index,
// then the lowest threshold, so trees are deterministic. Leaves keep their
// training-row members so callers can either average them (prediction) or
// draw from them (imputation kernels).
class RegressionTree {
 public:
  // `rows` may contain duplicates (bootstrap resamples).
  void fit(const DataMatrix& X, const std::vector<double>& y, const std::vector<int>& rows,
           const TreeConfig& cfg, Rng& rng);

  // same growth from shared presorted orders plus per-row multiplicities
  void fit_presorted(const DataMatrix& X, const FeatureOrders& orders,
                     const std::vector<double>& y, const std::vector<int>& multiplicity,
                     const TreeConfig& cfg, Rng& rng);

  // histogram growth on pre-binned features: splits land on bin edges, leaf
  // membership is not recorded (prediction-only trees)
  void fit_binned(const QuantileBins& bins, const std::vector<double>& y,
                  const std::vector<int>& multiplicity, const TreeConfig& cfg, Rng& rng);

  int find_leaf(const double* x) const;
  double leaf_mean(int node) const { return nodes_[node].mean; }
  std::span<const int> leaf_members(int node) const {
    const Node& nd = nodes_[node];
    return {members_.data() + nd.mem_begin, static_cast<size_t>(nd.mem_end - nd.mem_begin)};
  }
  double predict_row(const double* x) const { return nodes_[find_leaf(x)].mean; }
  size_t n_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    int feature = -1;  // -1 = leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    double mean = 0.0;
    int mem_begin = 0, mem_end = 0;
  };
  std::vector<Node> nodes_;
  std::vector<int> members_;

  void grow(const DataMatrix& X, const std::vector<double>& y,
            std::vector<std::vector<int>> order, const TreeConfig& cfg, Rng& rng);
};

struct ForestConfig {
  int n_trees = 10;
  int min_leaf = 5;
  int max_features = 0;  // 0 = ceil(sqrt(p))
  bool bootstrap = true;
  bool binned = false;  // histogram splits; keeps no leaf members
  int n_bins = 255;
  uint64_t seed = 0;
};

class RegressionForest {
 public:
  void fit(const DataMatrix& X, const std::vector<double>& y, const ForestConfig& cfg);
  double predict_row(const double* x) const;  // mean of per-tree leaf means
  const RegressionTree& tree(size_t i) const { return trees_[i]; }
  size_t n_trees() const { return trees_.size(); }

 private:
  std::vector<RegressionTree> trees_;
};

}  // namespace mslong
