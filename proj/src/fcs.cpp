#include "mslong/fcs.hpp"

#include <algorithm>
#include <cmath>

#include "mslong/regress.hpp"
#include "mslong/tree.hpp"

namespace mslong {

std::string fcs_kernel_name(FcsKernel k) {
  switch (k) {
    case FcsKernel::PMM: return "pmm";
    case FcsKernel::CART: return "cart";
    case FcsKernel::RF: return "rf";
    case FcsKernel::BLG: return "blg";
    case FcsKernel::LG: return "lg";
    case FcsKernel::LGP: return "lgp";
    case FcsKernel::LGnob: return "lgnob";
  }
  return "?";
}

void FcsConfig::validate() const {
  if (m < 1) throw DataError("fcs: m must be >= 1");
  if (n_cycles < 1) throw DataError("fcs: n_cycles must be >= 1");
  if (donors < 1) throw DataError("fcs: donors must be >= 1");
  if (n_trees < 1) throw DataError("fcs: n_trees must be >= 1");
  if (min_leaf < 1) throw DataError("fcs: min_leaf must be >= 1");
}

// --- kernels ---

std::vector<int> pmm_match(const std::vector<double>& pred_obs,
                           const std::vector<double>& pred_mis, int donors, Rng& rng) {
  if (donors < 1) throw DataError("pmm_match: donors must be >= 1");
  if (static_cast<size_t>(donors) > pred_obs.size())
    throw DataError("pmm_match: fewer observed rows than donors");
  const int k = donors;
  std::vector<int> out(pred_mis.size());
  std::vector<std::pair<double, int>> dist(pred_obs.size());
  for (size_t i = 0; i < pred_mis.size(); ++i) {
    for (size_t j = 0; j < pred_obs.size(); ++j)
      dist[j] = {std::abs(pred_obs[j] - pred_mis[i]), static_cast<int>(j)};
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    out[i] = dist[rng.uniform_int(k)].second;
  }
  return out;
}

std::vector<double> kernel_pmm(const Eigen::MatrixXd& X_obs, const Eigen::VectorXd& y_obs,
                               const Eigen::MatrixXd& X_mis, int donors, Rng& rng) {
  const OlsFit fit = ols_fit(X_obs, y_obs);
  const Eigen::VectorXd beta_draw = bayes_coef_draw(fit, rng, nullptr);
  const Eigen::VectorXd po = X_obs * fit.beta;        // observed rows: point predictions
  const Eigen::VectorXd pm = X_mis * beta_draw;       // missing rows: posterior-draw predictions
  const std::vector<double> pred_obs(po.data(), po.data() + po.size());
  const std::vector<double> pred_mis(pm.data(), pm.data() + pm.size());
  const std::vector<int> donors_idx = pmm_match(pred_obs, pred_mis, donors, rng);
  std::vector<double> out(donors_idx.size());
  for (size_t i = 0; i < donors_idx.size(); ++i) out[i] = y_obs[donors_idx[i]];
  return out;
}

namespace {

DataMatrix to_data_matrix(const Eigen::MatrixXd& X) {
  DataMatrix m;
  m.n = static_cast<int>(X.rows());
  m.p = static_cast<int>(X.cols());
  m.data.assign(X.data(), X.data() + X.size());  // both column-major
  return m;
}

}  // namespace

std::vector<double> kernel_cart(const Eigen::MatrixXd& X_obs, const Eigen::VectorXd& y_obs,
                                const Eigen::MatrixXd& X_mis, int min_leaf, Rng& rng) {
  if (X_obs.rows() < 2 * min_leaf)
    throw DataError("kernel_cart: need at least 2*min_leaf observed rows");
  const DataMatrix X = to_data_matrix(X_obs);
  const std::vector<double> y(y_obs.data(), y_obs.data() + y_obs.size());
  std::vector<int> rows(X.n);
  for (int i = 0; i < X.n; ++i) rows[i] = i;

  RegressionTree tree;
  TreeConfig tc;
  tc.min_leaf = min_leaf;
  tree.fit(X, y, rows, tc, rng);

  std::vector<double> out(X_mis.rows());
  std::vector<double> xrow(X.p);
  for (int i = 0; i < X_mis.rows(); ++i) {
    for (int c = 0; c < X.p; ++c) xrow[c] = X_mis(i, c);
    const auto members = tree.leaf_members(tree.find_leaf(xrow.data()));
    out[i] = y[members[rng.uniform_int(members.size())]];
  }
  return out;
}

std::vector<double> kernel_rf(const Eigen::MatrixXd& X_obs, const Eigen::VectorXd& y_obs,
                              const Eigen::MatrixXd& X_mis, int n_trees, int min_leaf, Rng& rng) {
  if (X_obs.rows() < 2 * min_leaf)
    throw DataError("kernel_rf: need at least 2*min_leaf observed rows");
  const DataMatrix X = to_data_matrix(X_obs);
  const std::vector<double> y(y_obs.data(), y_obs.data() + y_obs.size());

  RegressionForest forest;
  ForestConfig fc;
  fc.n_trees = n_trees;
  fc.min_leaf = min_leaf;
  fc.bootstrap = true;
  fc.seed = rng.next_u64();
  forest.fit(X, y, fc);

  std::vector<double> out(X_mis.rows());
  std::vector<double> xrow(X.p);
  for (int i = 0; i < X_mis.rows(); ++i) {
    for (int c = 0; c < X.p; ++c) xrow[c] = X_mis(i, c);
    const RegressionTree& t = forest.tree(rng.uniform_int(forest.n_trees()));
    const auto members = t.leaf_members(t.find_leaf(xrow.data()));
    out[i] = y[members[rng.uniform_int(members.size())]];
  }
  return out;
}

std::vector<double> kernel_blg(const Eigen::MatrixXd& X_obs, const Eigen::VectorXd& y_obs,
                               const Eigen::MatrixXd& X_mis, Rng& rng) {
  const OlsFit fit = ols_fit(X_obs, y_obs);
  double sigma2 = 0.0;
  const Eigen::VectorXd beta_draw = bayes_coef_draw(fit, rng, &sigma2);
  const double sd = std::sqrt(sigma2);
  const Eigen::VectorXd mean = X_mis * beta_draw;
  std::vector<double> out(X_mis.rows());
  for (int i = 0; i < X_mis.rows(); ++i) out[i] = mean[i] + rng.normal(0.0, sd);
  return out;
}

std::vector<double> kernel_lg(const Eigen::MatrixXd& X_obs, const Eigen::VectorXd& y_obs,
                              const Eigen::MatrixXd& X_mis, LgVariant variant, Rng& rng) {
  std::vector<double> out(X_mis.rows());
  if (variant == LgVariant::LGP) {
    const OlsFit fit = ols_fit(X_obs, y_obs);
    const Eigen::VectorXd mean = X_mis * fit.beta;
    for (int i = 0; i < X_mis.rows(); ++i) out[i] = mean[i];
    return out;
  }
  if (variant == LgVariant::LGnob) {
    const OlsFit fit = ols_fit(X_obs, y_obs);
    const double sd = std::sqrt(fit.sigma2_hat);
    const Eigen::VectorXd mean = X_mis * fit.beta;
    for (int i = 0; i < X_mis.rows(); ++i) out[i] = mean[i] + rng.normal(0.0, sd);
    return out;
  }
  // LG: parameter uncertainty via a bootstrap refit
  const int n = static_cast<int>(X_obs.rows());
  Eigen::MatrixXd Xb(n, X_obs.cols());
  Eigen::VectorXd yb(n);
  for (int i = 0; i < n; ++i) {
    const int r = static_cast<int>(rng.uniform_int(n));
    Xb.row(i) = X_obs.row(r);
    yb[i] = y_obs[r];
  }
  const OlsFit fit = ols_fit(Xb, yb);
  const double sd = std::sqrt(fit.sigma2_hat);
  const Eigen::VectorXd mean = X_mis * fit.beta;
  for (int i = 0; i < X_mis.rows(); ++i) out[i] = mean[i] + rng.normal(0.0, sd);
  return out;
}

// --- chained equations driver ---

namespace {

struct FeaturePlan {
  int feature = -1;
  std::vector<size_t> missing_rows;
  std::vector<size_t> observed_rows;
};

}  // namespace

std::vector<CompletedDataset> fcs_impute(const LongitudinalDataset& d, const FcsConfig& cfg,
                                         FcsDiagnostics* diag) {
  cfg.validate();
  const std::string method = fcs_kernel_name(cfg.kernel);
  const size_t n = d.n_records();
  const int target = d.schema.target_index();

  // statics and target must be complete (validate enforces it on top of
  // schema checks); incomplete features are the time-varying ones
  d.validate(false);

  std::vector<FeaturePlan> plans;
  for (const int f : d.schema.time_varying_indices()) {
    FeaturePlan fp;
    fp.feature = f;
    for (size_t i = 0; i < n; ++i) {
      if (is_missing(d.records[i].values[f]))
        fp.missing_rows.push_back(i);
      else
        fp.observed_rows.push_back(i);
    }
    if (fp.missing_rows.empty()) continue;
    const size_t need = static_cast<size_t>(std::max(cfg.donors, cfg.min_leaf)) + 1;
    if (fp.observed_rows.size() < need)
      throw DataError("fcs: feature '" + d.schema.at(f).name + "' has only " +
                      std::to_string(fp.observed_rows.size()) + " observed rows, need >= " +
                      std::to_string(need));
    plans.push_back(std::move(fp));
  }
  // ascending missing-rate order; ties keep schema order
  std::stable_sort(plans.begin(), plans.end(), [](const FeaturePlan& a, const FeaturePlan& b) {
    return a.missing_rows.size() < b.missing_rows.size();
  });

  // predictor columns: intercept + every other feature (target only if allowed)
  std::vector<int> predictor_pool;
  for (size_t f = 0; f < d.schema.size(); ++f) {
    if (static_cast<int>(f) == target && !cfg.use_target) continue;
    predictor_pool.push_back(static_cast<int>(f));
  }

  std::vector<std::pair<size_t, int>> imputed_cells;
  for (const auto& fp : plans)
    for (const size_t r : fp.missing_rows) imputed_cells.emplace_back(r, fp.feature);
  std::sort(imputed_cells.begin(), imputed_cells.end());

  if (diag) diag->imputed_means.assign(cfg.m, {});

  std::vector<CompletedDataset> out;
  out.reserve(cfg.m);
  for (int chain = 0; chain < cfg.m; ++chain) {
    const uint64_t chain_seed = cfg.seed + static_cast<uint64_t>(chain);
    Rng rng(chain_seed);
    LongitudinalDataset work = d;

    // initialize missing cells with uniform draws from the observed values
    for (const auto& fp : plans) {
      for (const size_t r : fp.missing_rows) {
        const size_t pick = fp.observed_rows[rng.uniform_int(fp.observed_rows.size())];
        work.records[r].values[fp.feature] = d.records[pick].values[fp.feature];
      }
    }

    for (int cycle = 0; cycle < cfg.n_cycles && !plans.empty(); ++cycle) {
      for (const auto& fp : plans) {
        std::vector<int> pred_cols;
        for (const int c : predictor_pool)
          if (c != fp.feature) pred_cols.push_back(c);

        const int q = static_cast<int>(pred_cols.size()) + 1;
        Eigen::MatrixXd X_obs(fp.observed_rows.size(), q);
        Eigen::VectorXd y_obs(fp.observed_rows.size());
        for (size_t i = 0; i < fp.observed_rows.size(); ++i) {
          const auto& vals = work.records[fp.observed_rows[i]].values;
          X_obs(i, 0) = 1.0;
          for (size_t c = 0; c < pred_cols.size(); ++c) X_obs(i, c + 1) = vals[pred_cols[c]];
          y_obs[i] = vals[fp.feature];
        }
        Eigen::MatrixXd X_mis(fp.missing_rows.size(), q);
        for (size_t i = 0; i < fp.missing_rows.size(); ++i) {
          const auto& vals = work.records[fp.missing_rows[i]].values;
          X_mis(i, 0) = 1.0;
          for (size_t c = 0; c < pred_cols.size(); ++c) X_mis(i, c + 1) = vals[pred_cols[c]];
        }

        std::vector<double> draws;
        try {
          switch (cfg.kernel) {
            case FcsKernel::PMM:
              draws = kernel_pmm(X_obs, y_obs, X_mis, cfg.donors, rng);
              break;
            case FcsKernel::CART:
              draws = kernel_cart(X_obs, y_obs, X_mis, cfg.min_leaf, rng);
              break;
            case FcsKernel::RF:
              draws = kernel_rf(X_obs, y_obs, X_mis, cfg.n_trees, cfg.min_leaf, rng);
              break;
            case FcsKernel::BLG:
              draws = kernel_blg(X_obs, y_obs, X_mis, rng);
              break;
            case FcsKernel::LG:
              draws = kernel_lg(X_obs, y_obs, X_mis, LgVariant::LG, rng);
              break;
            case FcsKernel::LGP:
              draws = kernel_lg(X_obs, y_obs, X_mis, LgVariant::LGP, rng);
              break;
            case FcsKernel::LGnob:
              draws = kernel_lg(X_obs, y_obs, X_mis, LgVariant::LGnob, rng);
              break;
          }
        } catch (const MethodError&) {
          throw;
        } catch (const std::exception& e) {
          throw MethodError(method,
                            "feature '" + d.schema.at(fp.feature).name + "': " + e.what());
        }
        for (size_t i = 0; i < fp.missing_rows.size(); ++i)
          work.records[fp.missing_rows[i]].values[fp.feature] = draws[i];
      }

      if (diag) {
        std::map<std::string, double> means;
        for (const auto& fp : plans) {
          double s = 0.0;
          for (const size_t r : fp.missing_rows) s += work.records[r].values[fp.feature];
          means[d.schema.at(fp.feature).name] = s / static_cast<double>(fp.missing_rows.size());
        }
        diag->imputed_means[chain].push_back(std::move(means));
      }
    }

    CompletedDataset cd;
    cd.dataset = std::move(work);
    cd.provenance = {method, chain, chain_seed};
    cd.imputed_cells = imputed_cells;
    out.push_back(std::move(cd));
  }
  return out;
}

CompletedDataset pool_mean(const std::vector<CompletedDataset>& completed) {
  if (completed.empty()) throw DataError("pool_mean: empty input");
  const CompletedDataset& first = completed.front();
  for (const auto& c : completed) {
    if (c.dataset.records.size() != first.dataset.records.size())
      throw DataError("pool_mean: record count mismatch");
    if (c.imputed_cells != first.imputed_cells)
      throw DataError("pool_mean: mismatched masks across imputations");
  }

  CompletedDataset out = first;
  for (const auto& [r, f] : out.imputed_cells) {
    double s = 0.0;
    for (const auto& c : completed) s += c.dataset.records[r].values[f];
    out.dataset.records[r].values[f] = s / static_cast<double>(completed.size());
  }
  out.provenance.method = first.provenance.method;
  out.provenance.imputation_index = static_cast<int>(completed.size());
  return out;
}

}  // namespace mslong
