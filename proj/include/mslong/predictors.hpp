#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mslong/dataset.hpp"
#include "mslong/gbt.hpp"
#include "mslong/svr.hpp"
#include "mslong/tree.hpp"

namespace mslong {

enum class PredictorKind { KNN, RF, GBT, SVR };

std::string predictor_kind_name(PredictorKind k);
PredictorKind predictor_kind_from(const std::string& name);

struct PredictorSpec {
  PredictorKind kind = PredictorKind::KNN;
  std::map<std::string, double> hyper;  // missing entries get defaults
  uint64_t seed = 0;

  // fills defaults for the kind and range-checks every value
  void validate_and_fill();
  double get(const std::string& name) const;
};

// Default grid-search candidates per predictor kind.
std::vector<std::map<std::string, double>> grid_for(PredictorKind kind);

// Per-column affine standardization fitted on training rows only.
struct Standardizer {
  std::vector<double> mean, scale;
  void fit(const DataMatrix& X);
  void apply(DataMatrix& X) const;
};

// Design matrix for EDSS regression: statics + FS sub-scores + t_days,
// target EDSS. Built only from fully observed datasets.
struct FeatureMatrix {
  DataMatrix X;  // unstandardized
  std::vector<double> y;
  std::vector<std::string> column_names;
  std::vector<std::string> row_patients;  // provenance, one per row
};

FeatureMatrix build_feature_matrix(const LongitudinalDataset& completed,
                                   bool include_t_days = true);

// A fitted model plus the standardization fitted on its training rows.
class PredictorModel {
 public:
  static PredictorModel fit(const PredictorSpec& spec, const FeatureMatrix& train);
  std::vector<double> predict(const FeatureMatrix& rows) const;

  const PredictorSpec& spec() const { return spec_; }
  bool svr_converged() const;
  const GbtModel& gbt() const { return *gbt_; }
  const SvrModel& svr() const { return *svr_; }

  // kind, hyperparameters, and fitted-size facts (tree/SV counts) as JSON
  std::string summary_json() const;

 private:
  PredictorSpec spec_;
  Standardizer std_;
  std::vector<std::string> train_patients_;
  // KNN keeps its standardized training data
  std::shared_ptr<DataMatrix> knn_x_;
  std::shared_ptr<std::vector<double>> knn_y_;
  std::shared_ptr<RegressionForest> forest_;
  std::shared_ptr<GbtModel> gbt_;
  std::shared_ptr<SvrModel> svr_;

  friend std::vector<std::string> model_train_patients(const PredictorModel&);
};

inline std::vector<std::string> model_train_patients(const PredictorModel& m) {
  return m.train_patients_;
}

// Exhaustible KNN regression on standardized features; distance ties break
// toward the lower training-row index.
std::vector<double> knn_predict(const DataMatrix& train_x, const std::vector<double>& train_y,
                                const DataMatrix& query, int k);

}  // namespace mslong
