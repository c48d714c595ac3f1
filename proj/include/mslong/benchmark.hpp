#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mslong/fcs.hpp"
#include "mslong/joint.hpp"
#include "mslong/mask.hpp"
#include "mslong/predictors.hpp"
#include "mslong/series.hpp"
#include "mslong/split.hpp"

namespace mslong {

// One configured imputation method: takes an incomplete dataset and a seed,
// returns a single completed dataset (multiple-imputation methods pool their
// m chains internally).
struct NamedImputer {
  std::string id;
  std::function<CompletedDataset(const LongitudinalDataset&, uint64_t)> run;
};

struct ImputerOptions {
  int m = 5;
  int n_cycles = 10;
  int donors = 5;
  int fcs_trees = 10;
  int fcs_min_leaf = 5;
  int jm_burn = 1000;
  int jm_between = 100;
  double mh_step = 0.1;
  bool use_target = false;
  EwmaOptions ewma;
};

// The default 14-method roster: linear, spline, locf, ewma, pmm, cart, rf,
// blg, lg, lgp, lgnob, jm_clustered, jm_single, jm_lg.
std::vector<NamedImputer> default_imputers(const ImputerOptions& opts = {});
NamedImputer make_imputer(const std::string& id, const ImputerOptions& opts = {});
std::vector<std::string> default_imputer_ids();

// Wraps a filled dataset into a CompletedDataset for custom methods (the
// imputed-cell list is recovered from the source's missing cells).
CompletedDataset as_completed(const LongitudinalDataset& source,
                              LongitudinalDataset filled, const std::string& method,
                              uint64_t seed);

struct ImputationReportRow {
  std::string method;
  double rmse = 0.0;  // pooled over all masked cells
  size_t n_masked = 0;
  long runtime_ms = 0;
  std::map<std::string, double> per_feature_rmse;
};

struct MethodFailure {
  std::string method;
  std::string error;
};

struct ImputationBenchResult {
  std::vector<ImputationReportRow> rows;  // ascending rmse
  std::vector<MethodFailure> failures;
  MaskPlan plan;
};

// Experiment A: complete-case subset -> mask -> impute with every method ->
// RMSE over the hidden cells.
ImputationBenchResult run_imputation_benchmark(const LongitudinalDataset& d,
                                               const std::vector<NamedImputer>& methods,
                                               const std::map<std::string, double>& rates,
                                               MaskMechanism mechanism, uint64_t seed,
                                               int jobs = 1);

// Lowest-RMSE method ids; ties break by lower runtime, then name.
std::vector<std::string> select_top_imputers(const std::vector<ImputationReportRow>& rows,
                                             size_t n = 5);

struct PairResult {
  std::string imputer;
  std::string predictor;
  std::map<std::string, double> best_hyperparameters;
  double mean_r2_cv = 0.0;
  double std_r2_cv = 0.0;
  std::optional<double> r2_test;
  std::vector<double> fold_scores;  // per successful fold, best grid point
  int n_failed_folds = 0;
};

using PredictorGrids = std::map<PredictorKind, std::vector<std::map<std::string, double>>>;
PredictorGrids default_grids();

// The fold assignment run_pair_selection uses for a given (train, k, seed).
SplitAssignment pair_selection_folds(const LongitudinalDataset& train, int k, uint64_t seed);

// Experiment B selection: patient-grouped k-fold CV on the incomplete
// training split; every (imputer, predictor, grid point) combination is
// scored per fold, and each pair reports its best grid point by mean R2.
// Pairs with more than 2 failed folds are dropped from the ranking.
std::vector<PairResult> run_pair_selection(const LongitudinalDataset& train,
                                           const std::vector<NamedImputer>& imputers,
                                           const std::vector<PredictorKind>& predictors,
                                           const PredictorGrids& grids, int k, uint64_t seed,
                                           int jobs = 1);

// Experiment B final scoring: keeps the best predictor of each distinct
// imputer among `selected` (n_final pairs), refits on the fully imputed
// training split and fills r2_test from the independently imputed test split.
std::vector<PairResult> run_test_evaluation(const LongitudinalDataset& train,
                                            const LongitudinalDataset& test,
                                            const std::vector<NamedImputer>& imputers,
                                            const std::vector<PairResult>& selected,
                                            size_t n_final, uint64_t seed, int jobs = 1);

// --- report files ---

void write_imputation_report(std::ostream& out, const std::vector<ImputationReportRow>& rows);
void write_per_feature_report(std::ostream& out, const std::vector<ImputationReportRow>& rows);
void write_prediction_report(std::ostream& out, const std::vector<PairResult>& rows);
std::string hyperparameters_json(const std::map<std::string, double>& hyper);

}  // namespace mslong
