#include "mslong/tree.hpp"

#include <algorithm>
#include <cmath>

namespace mslong {

namespace {

struct WorkItem {
  int node;
  int begin;  // range into the per-feature order arrays
  int end;
};

}  // namespace

FeatureOrders FeatureOrders::build(const DataMatrix& X) {
  FeatureOrders out;
  out.order.resize(X.p);
  for (int f = 0; f < X.p; ++f) {
    auto& ord = out.order[f];
    ord.resize(X.n);
    for (int i = 0; i < X.n; ++i) ord[i] = i;
    const double* col = X.col(f);
    std::sort(ord.begin(), ord.end(), [col](int a, int b) {
      if (col[a] != col[b]) return col[a] < col[b];
      return a < b;
    });
  }
  return out;
}

QuantileBins QuantileBins::build(const DataMatrix& X, int n_bins) {
  if (n_bins < 2) throw DataError("QuantileBins: n_bins must be >= 2");
  QuantileBins out;
  out.edges.resize(X.p);
  out.codes.assign(X.p, std::vector<uint16_t>(X.n));
  for (int f = 0; f < X.p; ++f) {
    std::vector<double> vals(X.col(f), X.col(f) + X.n);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    const int k = static_cast<int>(vals.size());
    auto& edges = out.edges[f];
    if (k <= n_bins) {
      for (int i = 0; i + 1 < k; ++i) edges.push_back(0.5 * (vals[i] + vals[i + 1]));
    } else {
      for (int j = 1; j < n_bins; ++j) {
        const int c = static_cast<int>(static_cast<long>(j) * k / n_bins);
        if (c >= 1 && c < k) edges.push_back(0.5 * (vals[c - 1] + vals[c]));
      }
      edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    }
    for (int i = 0; i < X.n; ++i)
      out.codes[f][i] = static_cast<uint16_t>(out.bin_of(f, X.at(i, f)));
  }
  return out;
}

int QuantileBins::bin_of(int feature, double v) const {
  const auto& e = edges[feature];
  return static_cast<int>(std::upper_bound(e.begin(), e.end(), v) - e.begin());
}

void RegressionTree::fit(const DataMatrix& X, const std::vector<double>& y,
                         const std::vector<int>& rows, const TreeConfig& cfg, Rng& rng) {
  if (rows.empty()) throw DataError("RegressionTree::fit: no rows");
  std::vector<std::vector<int>> order(X.p);
  for (int f = 0; f < X.p; ++f) {
    order[f] = rows;
    const double* col = X.col(f);
    std::stable_sort(order[f].begin(), order[f].end(),
                     [col](int a, int b) { return col[a] < col[b]; });
  }
  grow(X, y, std::move(order), cfg, rng);
}

void RegressionTree::fit_presorted(const DataMatrix& X, const FeatureOrders& orders,
                                   const std::vector<double>& y,
                                   const std::vector<int>& multiplicity, const TreeConfig& cfg,
                                   Rng& rng) {
  size_t total = 0;
  for (const int m : multiplicity) total += static_cast<size_t>(m);
  if (total == 0) throw DataError("RegressionTree::fit_presorted: no rows");
  std::vector<std::vector<int>> order(X.p);
  for (int f = 0; f < X.p; ++f) {
    auto& ord = order[f];
    ord.reserve(total);
    for (const int r : orders.order[f])
      for (int m = 0; m < multiplicity[r]; ++m) ord.push_back(r);
  }
  grow(X, y, std::move(order), cfg, rng);
}

void RegressionTree::grow(const DataMatrix& X, const std::vector<double>& y,
                          std::vector<std::vector<int>> order, const TreeConfig& cfg, Rng& rng) {
  if (cfg.min_leaf < 1) throw DataError("RegressionTree: min_leaf must be >= 1");
  nodes_.clear();
  members_.clear();

  const int n = static_cast<int>(order[0].size());
  const int p = X.p;
  std::vector<int> scratch(n);

  nodes_.emplace_back();
  std::vector<WorkItem> stack{{0, 0, n}};
  std::vector<int> feats;

  while (!stack.empty()) {
    const WorkItem it = stack.back();
    stack.pop_back();
    const int count = it.end - it.begin;

    double sum = 0.0, sumsq = 0.0;
    for (int i = it.begin; i < it.end; ++i) {
      const double v = y[order[0][i]];
      sum += v;
      sumsq += v * v;
    }
    Node& node = nodes_[it.node];
    node.mean = sum / count;
    const double ss = sumsq - sum * sum / count;
    const bool splittable =
        count >= 2 * cfg.min_leaf && ss > 1e-10 * (std::abs(sumsq) + 1e-300);

    int best_f = -1;
    double best_gain = sum * sum / count;  // parent score; a split must beat it
    double best_thr = 0.0;

    if (splittable) {
      feats.clear();
      if (cfg.max_features <= 0 || cfg.max_features >= p) {
        for (int f = 0; f < p; ++f) feats.push_back(f);
      } else {
        rng.sample_small(p, cfg.max_features, feats);
        std::sort(feats.begin(), feats.end());
      }
      for (const int f : feats) {
        const double* col = X.col(f);
        const std::vector<int>& ord = order[f];
        double lsum = 0.0;
        for (int i = it.begin; i < it.end - 1; ++i) {
          lsum += y[ord[i]];
          const double v = col[ord[i]];
          const double vnext = col[ord[i + 1]];
          if (v == vnext) continue;  // not a boundary between distinct values
          const int nl = i - it.begin + 1;
          const int nr = count - nl;
          if (nl < cfg.min_leaf || nr < cfg.min_leaf) continue;
          const double rsum = sum - lsum;
          const double gain = lsum * lsum / nl + rsum * rsum / nr;
          if (gain > best_gain) {
            best_gain = gain;
            best_f = f;
            best_thr = v + 0.5 * (vnext - v);
          }
        }
      }
    }

    if (best_f < 0) {
      node.feature = -1;
      node.mem_begin = static_cast<int>(members_.size());
      for (int i = it.begin; i < it.end; ++i) members_.push_back(order[0][i]);
      node.mem_end = static_cast<int>(members_.size());
      continue;
    }

    // stable partition of every feature order around the split; the actual
    // left count is authoritative (the midpoint may round onto a data value)
    const double* scol = X.col(best_f);
    const double thr = best_thr;
    int actual_nl = 0;
    for (int f = 0; f < p; ++f) {
      std::vector<int>& ord = order[f];
      int nl = 0, nr = 0;
      for (int i = it.begin; i < it.end; ++i) {
        const int r = ord[i];
        if (scol[r] <= thr)
          ord[it.begin + nl++] = r;
        else
          scratch[nr++] = r;
      }
      std::copy(scratch.begin(), scratch.begin() + nr, ord.begin() + it.begin + nl);
      actual_nl = nl;
    }

    if (actual_nl == 0 || actual_nl == count) {  // degenerate rounding fold
      node.feature = -1;
      node.mem_begin = static_cast<int>(members_.size());
      for (int i = it.begin; i < it.end; ++i) members_.push_back(order[0][i]);
      node.mem_end = static_cast<int>(members_.size());
      continue;
    }

    node.feature = best_f;
    node.threshold = best_thr;
    const int left_id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    nodes_.emplace_back();
    nodes_[it.node].left = left_id;
    nodes_[it.node].right = left_id + 1;

    const int mid = it.begin + actual_nl;
    // push right first so the left child is processed next (stable rng order)
    stack.push_back({left_id + 1, mid, it.end});
    stack.push_back({left_id, it.begin, mid});
  }
}

void RegressionTree::fit_binned(const QuantileBins& bins, const std::vector<double>& y,
                                const std::vector<int>& multiplicity, const TreeConfig& cfg,
                                Rng& rng) {
  if (cfg.min_leaf < 1) throw DataError("RegressionTree: min_leaf must be >= 1");
  nodes_.clear();
  members_.clear();

  const int p = static_cast<int>(bins.codes.size());
  std::vector<int> rows;
  rows.reserve(multiplicity.size());
  for (size_t r = 0; r < multiplicity.size(); ++r)
    for (int m = 0; m < multiplicity[r]; ++m) rows.push_back(static_cast<int>(r));
  if (rows.empty()) throw DataError("RegressionTree::fit_binned: no rows");
  const int n = static_cast<int>(rows.size());
  std::vector<int> scratch(n);

  int max_bins = 0;
  for (int f = 0; f < p; ++f) max_bins = std::max(max_bins, bins.n_bins(f));
  // histograms are kept clean between features by re-zeroing only the bins a
  // node actually touched, so deep tiny nodes cost O(rows), not O(bins)
  std::vector<double> hsum(max_bins, 0.0);
  std::vector<int> hcount(max_bins, 0);
  std::vector<int> touched;
  touched.reserve(max_bins);

  nodes_.emplace_back();
  std::vector<WorkItem> stack{{0, 0, n}};
  std::vector<int> feats;

  while (!stack.empty()) {
    const WorkItem it = stack.back();
    stack.pop_back();
    const int count = it.end - it.begin;

    double sum = 0.0, sumsq = 0.0;
    for (int i = it.begin; i < it.end; ++i) {
      const double v = y[rows[i]];
      sum += v;
      sumsq += v * v;
    }
    Node& node = nodes_[it.node];
    node.mean = sum / count;
    const double ss = sumsq - sum * sum / count;
    const bool splittable =
        count >= 2 * cfg.min_leaf && ss > 1e-10 * (std::abs(sumsq) + 1e-300);

    int best_f = -1, best_bin = 0;
    double best_gain = sum * sum / count;

    if (splittable) {
      feats.clear();
      if (cfg.max_features <= 0 || cfg.max_features >= p) {
        for (int f = 0; f < p; ++f) feats.push_back(f);
      } else {
        rng.sample_small(p, cfg.max_features, feats);
        std::sort(feats.begin(), feats.end());
      }
      for (const int f : feats) {
        if (bins.n_bins(f) < 2) continue;
        const auto& codes = bins.codes[f];
        touched.clear();
        for (int i = it.begin; i < it.end; ++i) {
          const int b = codes[rows[i]];
          if (hcount[b] == 0) touched.push_back(b);
          hsum[b] += y[rows[i]];
          hcount[b] += 1;
        }
        std::sort(touched.begin(), touched.end());
        // boundaries between runs of empty bins share the gain of the first
        // one, so scanning only the present bins picks the same split
        double lsum = 0.0;
        int lcnt = 0;
        for (size_t ti = 0; ti + 1 < touched.size(); ++ti) {
          const int b = touched[ti];
          lsum += hsum[b];
          lcnt += hcount[b];
          if (lcnt < cfg.min_leaf) continue;
          const int rcnt = count - lcnt;
          if (rcnt < cfg.min_leaf) break;
          const double rsum = sum - lsum;
          const double gain = lsum * lsum / lcnt + rsum * rsum / rcnt;
          if (gain > best_gain) {
            best_gain = gain;
            best_f = f;
            best_bin = b;
          }
        }
        for (const int b : touched) {
          hsum[b] = 0.0;
          hcount[b] = 0;
        }
      }
    }

    if (best_f < 0) {
      node.feature = -1;
      continue;  // prediction-only leaf, no member list
    }

    const auto& codes = bins.codes[best_f];
    int nl = 0, nr = 0;
    for (int i = it.begin; i < it.end; ++i) {
      const int r = rows[i];
      if (codes[r] <= best_bin)
        rows[it.begin + nl++] = r;
      else
        scratch[nr++] = r;
    }
    std::copy(scratch.begin(), scratch.begin() + nr, rows.begin() + it.begin + nl);
    if (nl == 0 || nl == count) {
      node.feature = -1;
      continue;
    }

    node.feature = best_f;
    node.threshold = bins.edges[best_f][best_bin];
    const int left_id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    nodes_.emplace_back();
    nodes_[it.node].left = left_id;
    nodes_[it.node].right = left_id + 1;
    stack.push_back({left_id + 1, it.begin + nl, it.end});
    stack.push_back({left_id, it.begin, it.begin + nl});
  }
}

int RegressionTree::find_leaf(const double* x) const {
  int node = 0;
  while (nodes_[node].feature >= 0)
    node = (x[nodes_[node].feature] <= nodes_[node].threshold) ? nodes_[node].left
                                                               : nodes_[node].right;
  return node;
}

void RegressionForest::fit(const DataMatrix& X, const std::vector<double>& y,
                           const ForestConfig& cfg) {
  if (cfg.n_trees < 1) throw DataError("RegressionForest::fit: n_trees must be >= 1");
  trees_.assign(cfg.n_trees, RegressionTree{});
  TreeConfig tc;
  tc.min_leaf = cfg.min_leaf;
  tc.max_features =
      cfg.max_features > 0 ? cfg.max_features : static_cast<int>(std::ceil(std::sqrt(X.p)));

  FeatureOrders orders;
  QuantileBins bins;
  if (cfg.binned)
    bins = QuantileBins::build(X, cfg.n_bins);
  else
    orders = FeatureOrders::build(X);

  std::vector<int> multiplicity(X.n);
  for (size_t t = 0; t < trees_.size(); ++t) {
    Rng rng(derive_seed(cfg.seed, "tree/" + std::to_string(t)));
    if (cfg.bootstrap) {
      std::fill(multiplicity.begin(), multiplicity.end(), 0);
      for (int i = 0; i < X.n; ++i) ++multiplicity[rng.uniform_int(X.n)];
    } else {
      std::fill(multiplicity.begin(), multiplicity.end(), 1);
    }
    if (cfg.binned)
      trees_[t].fit_binned(bins, y, multiplicity, tc, rng);
    else
      trees_[t].fit_presorted(X, orders, y, multiplicity, tc, rng);
  }
}

double RegressionForest::predict_row(const double* x) const {
  double sum = 0.0;
  for (const auto& t : trees_) sum += t.predict_row(x);
  return sum / static_cast<double>(trees_.size());
}

}  // namespace mslong
