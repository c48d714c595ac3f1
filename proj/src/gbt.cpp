#include "mslong/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mslong/errors.hpp"

namespace mslong {

namespace {

struct LeafInfo {
  std::vector<int> rows;
  int node = -1;       // index into the round's node vector
  double sum = 0.0;
  // best split found for this leaf
  int best_feature = -1;
  int best_bin = -1;
  double best_gain = 0.0;
};

}  // namespace

void GbtModel::fit(const DataMatrix& X, const std::vector<double>& y, const GbtConfig& cfg) {
  if (cfg.n_rounds < 0) throw DataError("gbt: n_rounds must be >= 0");
  if (!(cfg.learning_rate > 0.0 && cfg.learning_rate <= 1.0))
    throw DataError("gbt: learning_rate must be in (0, 1]");
  if (cfg.max_leaves < 1) throw DataError("gbt: max_leaves must be >= 1");
  if (cfg.min_leaf < 1) throw DataError("gbt: min_leaf must be >= 1");
  if (X.n < 2 * cfg.min_leaf) throw DataError("gbt: need at least 2*min_leaf rows");

  const int n = X.n, p = X.p;
  learning_rate_ = cfg.learning_rate;
  rounds_.clear();
  train_mse_.clear();

  const QuantileBins qbins = QuantileBins::build(X, cfg.n_bins);
  const auto& bins = qbins.codes;

  base_score_ = 0.0;
  for (const double v : y) base_score_ += v;
  base_score_ /= n;

  std::vector<double> resid(n);
  for (int i = 0; i < n; ++i) resid[i] = y[i] - base_score_;

  const int max_bins_total = cfg.n_bins + 1;
  std::vector<double> hsum(static_cast<size_t>(p) * max_bins_total);
  std::vector<int> hcount(static_cast<size_t>(p) * max_bins_total);

  auto eval_leaf = [&](LeafInfo& leaf) {
    leaf.best_feature = -1;
    leaf.best_gain = 0.0;
    const int cnt = static_cast<int>(leaf.rows.size());
    if (cnt < 2 * cfg.min_leaf) return;
    const double parent_score = leaf.sum * leaf.sum / cnt;
    for (int f = 0; f < p; ++f) {
      const int nb = qbins.n_bins(f);
      double* hs = hsum.data() + static_cast<size_t>(f) * max_bins_total;
      int* hc = hcount.data() + static_cast<size_t>(f) * max_bins_total;
      std::fill(hs, hs + nb, 0.0);
      std::fill(hc, hc + nb, 0);
      for (const int r : leaf.rows) {
        hs[bins[f][r]] += resid[r];
        hc[bins[f][r]] += 1;
      }
      double lsum = 0.0;
      int lcnt = 0;
      for (int b = 0; b + 1 < nb; ++b) {
        lsum += hs[b];
        lcnt += hc[b];
        if (lcnt < cfg.min_leaf) continue;
        const int rcnt = cnt - lcnt;
        if (rcnt < cfg.min_leaf) break;
        const double rsum = leaf.sum - lsum;
        const double gain = lsum * lsum / lcnt + rsum * rsum / rcnt - parent_score;
        if (gain > leaf.best_gain) {
          leaf.best_gain = gain;
          leaf.best_feature = f;
          leaf.best_bin = b;
        }
      }
    }
  };

  for (int round = 0; round < cfg.n_rounds; ++round) {
    std::vector<Node> nodes(1);
    std::vector<LeafInfo> leaves(1);
    leaves[0].node = 0;
    leaves[0].rows.resize(n);
    for (int i = 0; i < n; ++i) leaves[0].rows[i] = i;
    for (const double r : resid) leaves[0].sum += r;
    eval_leaf(leaves[0]);

    int n_leaves = 1;
    while (n_leaves < cfg.max_leaves) {
      int best = -1;
      for (size_t i = 0; i < leaves.size(); ++i) {
        if (leaves[i].best_feature < 0) continue;
        if (best < 0 || leaves[i].best_gain > leaves[best].best_gain) best = static_cast<int>(i);
      }
      if (best < 0) break;

      LeafInfo& lf = leaves[best];
      const int f = lf.best_feature;
      const int bsplit = lf.best_bin;
      Node& nd = nodes[lf.node];
      nd.feature = f;
      nd.bin_split = bsplit;
      nd.threshold = qbins.edges[f][bsplit];

      LeafInfo left, right;
      for (const int r : lf.rows) {
        if (bins[f][r] <= bsplit) {
          left.rows.push_back(r);
          left.sum += resid[r];
        } else {
          right.rows.push_back(r);
          right.sum += resid[r];
        }
      }
      left.node = static_cast<int>(nodes.size());
      right.node = left.node + 1;
      nodes[lf.node].left = left.node;
      nodes[lf.node].right = right.node;
      nodes.emplace_back();
      nodes.emplace_back();
      eval_leaf(left);
      eval_leaf(right);
      // replace the split leaf in place, append the other
      leaves[best] = std::move(left);
      leaves.push_back(std::move(right));
      ++n_leaves;
    }

    for (const auto& lf : leaves) {
      const double value = lf.sum / static_cast<double>(lf.rows.size());
      nodes[lf.node].value = value;
      for (const int r : lf.rows) resid[r] -= cfg.learning_rate * value;
    }

    double mse = 0.0;
    for (const double r : resid) mse += r * r;
    train_mse_.push_back(mse / n);
    rounds_.push_back(std::move(nodes));
  }
}

double GbtModel::predict_row(const double* x) const {
  double out = base_score_;
  for (const auto& nodes : rounds_) {
    int node = 0;
    while (nodes[node].feature >= 0)
      node = (x[nodes[node].feature] <= nodes[node].threshold) ? nodes[node].left
                                                               : nodes[node].right;
    out += learning_rate_ * nodes[node].value;
  }
  return out;
}

}  // namespace mslong
