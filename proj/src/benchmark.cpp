#include "mslong/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "mslong/csv.hpp"
#include "mslong/metrics.hpp"
#include "mslong/parallel.hpp"
#include "mslong/split.hpp"

namespace mslong {

namespace {

long elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                               t0)
      .count();
}

}  // namespace

CompletedDataset as_completed(const LongitudinalDataset& source, LongitudinalDataset filled,
                              const std::string& method, uint64_t seed) {
  CompletedDataset cd;
  for (size_t i = 0; i < source.records.size(); ++i)
    for (size_t f = 0; f < source.schema.size(); ++f)
      if (is_missing(source.records[i].values[f]))
        cd.imputed_cells.emplace_back(i, static_cast<int>(f));
  cd.dataset = std::move(filled);
  cd.provenance = {method, 0, seed};
  return cd;
}

std::vector<std::string> default_imputer_ids() {
  return {"linear", "spline", "locf",  "ewma",         "pmm",       "cart",  "rf",
          "blg",    "lg",     "lgp",   "lgnob",        "jm_clustered", "jm_single", "jm_lg"};
}

NamedImputer make_imputer(const std::string& id, const ImputerOptions& opts) {
  auto single = [id, opts](SingleMethod method) {
    return NamedImputer{id, [method, id, opts](const LongitudinalDataset& d, uint64_t seed) {
                          return as_completed(d, impute_dataset_single(d, method, opts.ewma), id,
                                              seed);
                        }};
  };
  if (id == "linear") return single(SingleMethod::Linear);
  if (id == "spline") return single(SingleMethod::Spline);
  if (id == "locf") return single(SingleMethod::Locf);
  if (id == "ewma") return single(SingleMethod::Ewma);

  static const std::map<std::string, FcsKernel> fcs_ids = {
      {"pmm", FcsKernel::PMM}, {"cart", FcsKernel::CART},   {"rf", FcsKernel::RF},
      {"blg", FcsKernel::BLG}, {"lg", FcsKernel::LG},       {"lgp", FcsKernel::LGP},
      {"lgnob", FcsKernel::LGnob}};
  if (const auto it = fcs_ids.find(id); it != fcs_ids.end()) {
    const FcsKernel kernel = it->second;
    return {id, [kernel, opts](const LongitudinalDataset& d, uint64_t seed) {
              FcsConfig cfg;
              cfg.kernel = kernel;
              cfg.m = opts.m;
              cfg.n_cycles = opts.n_cycles;
              cfg.donors = opts.donors;
              cfg.n_trees = opts.fcs_trees;
              cfg.min_leaf = opts.fcs_min_leaf;
              cfg.use_target = opts.use_target;
              cfg.seed = seed;
              return pool_mean(fcs_impute(d, cfg));
            }};
  }

  static const std::map<std::string, JmLevel> jm_ids = {{"jm_clustered", JmLevel::Clustered},
                                                        {"jm_single", JmLevel::Single},
                                                        {"jm_lg", JmLevel::Lg}};
  if (const auto it = jm_ids.find(id); it != jm_ids.end()) {
    const JmLevel level = it->second;
    return {id, [level, opts](const LongitudinalDataset& d, uint64_t seed) {
              JmConfig cfg;
              cfg.level = level;
              cfg.n_burn = opts.jm_burn;
              cfg.n_between = opts.jm_between;
              cfg.m = opts.m;
              cfg.mh_step = opts.mh_step;
              cfg.use_target = opts.use_target;
              cfg.seed = seed;
              return pool_mean(jm_impute(d, cfg));
            }};
  }
  throw DataError("unknown imputation method '" + id + "'");
}

std::vector<NamedImputer> default_imputers(const ImputerOptions& opts) {
  std::vector<NamedImputer> out;
  for (const auto& id : default_imputer_ids()) out.push_back(make_imputer(id, opts));
  return out;
}

ImputationBenchResult run_imputation_benchmark(const LongitudinalDataset& d,
                                               const std::vector<NamedImputer>& methods,
                                               const std::map<std::string, double>& rates,
                                               MaskMechanism mechanism, uint64_t seed,
                                               int jobs) {
  if (methods.empty()) throw DataError("run_imputation_benchmark: no methods");
  const LongitudinalDataset cc = complete_case_subset(d);
  auto [masked, plan] = apply_mask(cc, rates, mechanism, derive_seed(seed, "bench-mask"));

  ImputationBenchResult result;
  result.plan = plan;

  std::vector<ImputationReportRow> rows(methods.size());
  std::vector<std::optional<MethodFailure>> failures(methods.size());

  parallel_for(methods.size(), jobs, [&](size_t mi) {
    const NamedImputer& method = methods[mi];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const CompletedDataset completed =
          method.run(masked, derive_seed(seed, "bench-impute/" + method.id));
      PairedValues pv;
      pv.actual.reserve(plan.cells.size());
      pv.predicted.reserve(plan.cells.size());
      std::map<int, PairedValues> by_feature;
      for (const auto& cell : plan.cells) {
        const double predicted = completed.dataset.records[cell.record_idx].values[cell.feature];
        pv.actual.push_back(cell.true_value);
        pv.predicted.push_back(predicted);
        by_feature[cell.feature].actual.push_back(cell.true_value);
        by_feature[cell.feature].predicted.push_back(predicted);
      }
      rows[mi] = {method.id, rmse(pv), plan.cells.size(), elapsed_ms(t0), {}};
      for (const auto& [f, fpv] : by_feature)
        rows[mi].per_feature_rmse[masked.schema.at(f).name] = rmse(fpv);
    } catch (const std::exception& e) {
      failures[mi] = MethodFailure{method.id, e.what()};
    }
  });

  for (size_t mi = 0; mi < methods.size(); ++mi) {
    if (failures[mi])
      result.failures.push_back(*failures[mi]);
    else
      result.rows.push_back(rows[mi]);
  }
  std::sort(result.rows.begin(), result.rows.end(),
            [](const ImputationReportRow& a, const ImputationReportRow& b) {
              if (a.rmse != b.rmse) return a.rmse < b.rmse;
              return a.method < b.method;
            });
  return result;
}

std::vector<std::string> select_top_imputers(const std::vector<ImputationReportRow>& rows,
                                             size_t n) {
  if (rows.size() < n)
    throw DataError("select_top_imputers: need at least " + std::to_string(n) + " rows, got " +
                    std::to_string(rows.size()));
  std::vector<ImputationReportRow> sorted = rows;
  std::sort(sorted.begin(), sorted.end(),
            [](const ImputationReportRow& a, const ImputationReportRow& b) {
              if (a.rmse != b.rmse) return a.rmse < b.rmse;
              if (a.runtime_ms != b.runtime_ms) return a.runtime_ms < b.runtime_ms;
              return a.method < b.method;
            });
  std::vector<std::string> out;
  for (size_t i = 0; i < n; ++i) out.push_back(sorted[i].method);
  return out;
}

PredictorGrids default_grids() {
  PredictorGrids g;
  for (const auto kind :
       {PredictorKind::KNN, PredictorKind::RF, PredictorKind::GBT, PredictorKind::SVR})
    g[kind] = grid_for(kind);
  return g;
}

namespace {

struct FoldData {
  LongitudinalDataset train;
  LongitudinalDataset val;
};

double sample_sd(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (const double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

SplitAssignment pair_selection_folds(const LongitudinalDataset& train, int k, uint64_t seed) {
  return kfold_by_patient(train, k, derive_seed(seed, "cv-folds"));
}

std::vector<PairResult> run_pair_selection(const LongitudinalDataset& train,
                                           const std::vector<NamedImputer>& imputers,
                                           const std::vector<PredictorKind>& predictors,
                                           const PredictorGrids& grids, int k, uint64_t seed,
                                           int jobs) {
  if (imputers.empty() || predictors.empty())
    throw DataError("run_pair_selection: empty imputer or predictor list");
  const SplitAssignment folds = pair_selection_folds(train, k, seed);

  std::vector<FoldData> fold_data(k);
  for (int f = 0; f < k; ++f) {
    std::vector<std::string> val_p, train_p;
    for (const auto& [pid, fold] : folds.fold_of)
      (fold == f ? val_p : train_p).push_back(pid);
    fold_data[f].train = subset_by_patients(train, train_p);
    fold_data[f].val = subset_by_patients(train, val_p);
  }

  // score[imputer][predictor][grid point][fold] (NaN = failed)
  const size_t n_imp = imputers.size();
  const size_t n_kind = predictors.size();
  std::vector<std::vector<std::vector<std::vector<double>>>> score(n_imp);
  for (size_t i = 0; i < n_imp; ++i) {
    score[i].resize(n_kind);
    for (size_t c = 0; c < n_kind; ++c) {
      const auto git = grids.find(predictors[c]);
      if (git == grids.end() || git->second.empty())
        throw DataError("run_pair_selection: no grid for predictor " +
                        predictor_kind_name(predictors[c]));
      score[i][c].assign(git->second.size(),
                         std::vector<double>(k, std::numeric_limits<double>::quiet_NaN()));
    }
  }
  // fold-level imputation failure flags, per imputer
  std::vector<std::vector<char>> fold_failed(n_imp, std::vector<char>(k, 0));

  // one task = (imputer, fold): impute both portions once, then fit the grids
  parallel_for(n_imp * k, jobs, [&](size_t task) {
    const size_t ii = task / k;
    const int fold = static_cast<int>(task % k);
    const NamedImputer& imputer = imputers[ii];
    const FoldData& fd = fold_data[fold];
    const std::string key = imputer.id + "/" + std::to_string(fold);

    CompletedDataset ctrain, cval;
    try {
      ctrain = imputer.run(fd.train, derive_seed(seed, "cv-train/" + key));
      cval = imputer.run(fd.val, derive_seed(seed, "cv-val/" + key));
    } catch (const std::exception&) {
      fold_failed[ii][fold] = 1;
      return;
    }
    const FeatureMatrix fm_train = build_feature_matrix(ctrain.dataset);
    const FeatureMatrix fm_val = build_feature_matrix(cval.dataset);

    for (size_t ci = 0; ci < predictors.size(); ++ci) {
      const auto& grid = grids.at(predictors[ci]);
      for (size_t gi = 0; gi < grid.size(); ++gi) {
        PredictorSpec spec;
        spec.kind = predictors[ci];
        spec.hyper = grid[gi];
        spec.seed = derive_seed(seed, "cv-fit/" + key + "/" + predictor_kind_name(spec.kind) +
                                          "/" + std::to_string(gi));
        try {
          const PredictorModel model = PredictorModel::fit(spec, fm_train);
          PairedValues pv{fm_val.y, model.predict(fm_val)};
          score[ii][ci][gi][fold] = r2(pv);
        } catch (const std::exception&) {
          // grid point failed in this fold; stays NaN
        }
      }
    }
  });

  std::vector<PairResult> out;
  for (size_t ii = 0; ii < n_imp; ++ii) {
    for (size_t ci = 0; ci < predictors.size(); ++ci) {
      const auto& grid = grids.at(predictors[ci]);
      PairResult pr;
      pr.imputer = imputers[ii].id;
      pr.predictor = predictor_kind_name(predictors[ci]);

      int n_failed = 0;
      for (int f = 0; f < k; ++f) {
        bool any = false;
        for (size_t gi = 0; gi < grid.size(); ++gi)
          if (!std::isnan(score[ii][ci][gi][f])) any = true;
        if (!any) ++n_failed;
      }
      pr.n_failed_folds = n_failed;
      if (n_failed > 2) continue;  // excluded from ranking

      double best_mean = -std::numeric_limits<double>::infinity();
      size_t best_gi = 0;
      for (size_t gi = 0; gi < grid.size(); ++gi) {
        double s = 0.0;
        int c = 0;
        for (int f = 0; f < k; ++f)
          if (!std::isnan(score[ii][ci][gi][f])) {
            s += score[ii][ci][gi][f];
            ++c;
          }
        if (c == 0) continue;
        const double mean = s / c;
        if (mean > best_mean) {
          best_mean = mean;
          best_gi = gi;
        }
      }
      if (best_mean == -std::numeric_limits<double>::infinity()) continue;

      for (int f = 0; f < k; ++f)
        if (!std::isnan(score[ii][ci][best_gi][f]))
          pr.fold_scores.push_back(score[ii][ci][best_gi][f]);
      pr.best_hyperparameters = grid[best_gi];
      pr.mean_r2_cv = best_mean;
      pr.std_r2_cv = sample_sd(pr.fold_scores, best_mean);
      out.push_back(std::move(pr));
    }
  }

  std::sort(out.begin(), out.end(), [](const PairResult& a, const PairResult& b) {
    if (a.mean_r2_cv != b.mean_r2_cv) return a.mean_r2_cv > b.mean_r2_cv;
    if (a.imputer != b.imputer) return a.imputer < b.imputer;
    return a.predictor < b.predictor;
  });
  return out;
}

std::vector<PairResult> run_test_evaluation(const LongitudinalDataset& train,
                                            const LongitudinalDataset& test,
                                            const std::vector<NamedImputer>& imputers,
                                            const std::vector<PairResult>& selected,
                                            size_t n_final, uint64_t seed, int jobs) {
  if (selected.empty()) throw DataError("run_test_evaluation: empty selection");
  if (test.records.empty()) throw DataError("run_test_evaluation: empty test split");

  std::set<std::string> train_p, test_p;
  for (const auto& r : train.records) train_p.insert(r.patient_id);
  for (const auto& r : test.records) test_p.insert(r.patient_id);
  for (const auto& pid : test_p)
    if (train_p.count(pid))
      throw DataError("run_test_evaluation: patient '" + pid + "' appears in train and test");

  // best predictor per distinct imputer, imputers ordered by that best score
  std::map<std::string, PairResult> best_of;
  for (const auto& pr : selected) {
    const auto it = best_of.find(pr.imputer);
    if (it == best_of.end() || pr.mean_r2_cv > it->second.mean_r2_cv) best_of[pr.imputer] = pr;
  }
  std::vector<PairResult> chosen;
  for (const auto& [id, pr] : best_of) chosen.push_back(pr);
  std::sort(chosen.begin(), chosen.end(), [](const PairResult& a, const PairResult& b) {
    if (a.mean_r2_cv != b.mean_r2_cv) return a.mean_r2_cv > b.mean_r2_cv;
    return a.imputer < b.imputer;
  });
  if (chosen.size() > n_final) chosen.resize(n_final);

  parallel_for(chosen.size(), jobs, [&](size_t i) {
    PairResult& pr = chosen[i];
    const auto iit =
        std::find_if(imputers.begin(), imputers.end(),
                     [&](const NamedImputer& im) { return im.id == pr.imputer; });
    if (iit == imputers.end())
      throw DataError("run_test_evaluation: imputer '" + pr.imputer + "' not configured");

    const CompletedDataset ctrain =
        iit->run(train, derive_seed(seed, "final-train/" + pr.imputer));
    const CompletedDataset ctest = iit->run(test, derive_seed(seed, "final-test/" + pr.imputer));

    PredictorSpec spec;
    spec.kind = predictor_kind_from(pr.predictor);
    spec.hyper = pr.best_hyperparameters;
    spec.seed = derive_seed(seed, "final-fit/" + pr.imputer + "/" + pr.predictor);

    const FeatureMatrix fm_train = build_feature_matrix(ctrain.dataset);
    const FeatureMatrix fm_test = build_feature_matrix(ctest.dataset);
    const PredictorModel model = PredictorModel::fit(spec, fm_train);

    // provenance guard: the fitted model must not have seen any test patient
    for (const auto& pid : model_train_patients(model))
      if (test_p.count(pid))
        throw DataError("run_test_evaluation: leakage, model trained on test patient '" + pid +
                        "'");

    PairedValues pv{fm_test.y, model.predict(fm_test)};
    pr.r2_test = r2(pv);
  });
  return chosen;
}

void write_imputation_report(std::ostream& out, const std::vector<ImputationReportRow>& rows) {
  out << "method,rmse,n_masked,runtime_ms\n";
  for (const auto& r : rows)
    out << r.method << ',' << format_double(r.rmse) << ',' << r.n_masked << ',' << r.runtime_ms
        << '\n';
}

void write_per_feature_report(std::ostream& out, const std::vector<ImputationReportRow>& rows) {
  out << "method,feature,rmse\n";
  for (const auto& r : rows)
    for (const auto& [feature, v] : r.per_feature_rmse)
      out << r.method << ',' << feature << ',' << format_double(v) << '\n';
}

std::string hyperparameters_json(const std::map<std::string, double>& hyper) {
  nlohmann::json j(hyper);
  return j.dump();
}

void write_prediction_report(std::ostream& out, const std::vector<PairResult>& rows) {
  out << "imputer,predictor,mean_r2_cv,std_r2_cv,r2_test,hyperparameters_json\n";
  for (const auto& r : rows) {
    out << r.imputer << ',' << r.predictor << ',' << format_double(r.mean_r2_cv) << ','
        << format_double(r.std_r2_cv) << ',';
    if (r.r2_test) out << format_double(*r.r2_test);
    std::string json = hyperparameters_json(r.best_hyperparameters);
    std::string quoted = "\"";
    for (const char c : json) {
      if (c == '"') quoted += "\"\"";
      else quoted += c;
    }
    quoted += "\"";
    out << ',' << quoted << '\n';
  }
}

}  // namespace mslong
