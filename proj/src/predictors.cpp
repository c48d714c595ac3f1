#include "mslong/predictors.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace mslong {

std::string predictor_kind_name(PredictorKind k) {
  switch (k) {
    case PredictorKind::KNN: return "knn";
    case PredictorKind::RF: return "rf";
    case PredictorKind::GBT: return "gbt";
    case PredictorKind::SVR: return "svr";
  }
  return "?";
}

PredictorKind predictor_kind_from(const std::string& name) {
  if (name == "knn") return PredictorKind::KNN;
  if (name == "rf") return PredictorKind::RF;
  if (name == "gbt") return PredictorKind::GBT;
  if (name == "svr") return PredictorKind::SVR;
  throw DataError("unknown predictor '" + name + "'");
}

namespace {

void fill_default(std::map<std::string, double>& h, const std::string& k, double v) {
  h.emplace(k, v);
}

void check_range(const PredictorSpec& s, const std::string& k, double lo, double hi) {
  const double v = s.get(k);
  if (!(v >= lo && v <= hi))
    throw DataError("predictor " + predictor_kind_name(s.kind) + ": hyperparameter '" + k +
                    "' = " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
                    std::to_string(hi) + "]");
}

}  // namespace

double PredictorSpec::get(const std::string& name) const {
  const auto it = hyper.find(name);
  if (it == hyper.end())
    throw DataError("predictor " + predictor_kind_name(kind) + ": missing hyperparameter '" +
                    name + "'");
  return it->second;
}

void PredictorSpec::validate_and_fill() {
  switch (kind) {
    case PredictorKind::KNN:
      fill_default(hyper, "k", 5);
      check_range(*this, "k", 1, 1e9);
      break;
    case PredictorKind::RF:
      fill_default(hyper, "n_trees", 100);
      fill_default(hyper, "min_leaf", 5);
      fill_default(hyper, "max_features", 0);  // 0 = ceil(sqrt(p))
      fill_default(hyper, "bootstrap", 1);
      check_range(*this, "n_trees", 1, 1e6);
      check_range(*this, "min_leaf", 1, 1e9);
      check_range(*this, "bootstrap", 0, 1);
      break;
    case PredictorKind::GBT:
      fill_default(hyper, "n_rounds", 100);
      fill_default(hyper, "learning_rate", 0.1);
      fill_default(hyper, "max_leaves", 31);
      fill_default(hyper, "n_bins", 255);
      fill_default(hyper, "min_leaf", 5);
      check_range(*this, "n_rounds", 0, 1e6);
      if (!(get("learning_rate") > 0.0 && get("learning_rate") <= 1.0))
        throw DataError("predictor gbt: learning_rate must be in (0, 1]");
      check_range(*this, "max_leaves", 1, 1e6);
      check_range(*this, "n_bins", 2, 65535);
      check_range(*this, "min_leaf", 1, 1e9);
      break;
    case PredictorKind::SVR:
      fill_default(hyper, "C", 1.0);
      fill_default(hyper, "epsilon", 0.1);
      fill_default(hyper, "gamma", 0.1);
      fill_default(hyper, "tol", 1e-3);
      fill_default(hyper, "max_passes", 40000);
      if (!(get("C") > 0.0)) throw DataError("predictor svr: C must be positive");
      check_range(*this, "epsilon", 0.0, 1e9);
      // gamma = 0 is the documented placeholder for 1/p, resolved at fit time
      if (!(get("gamma") >= 0.0)) throw DataError("predictor svr: gamma must be >= 0");
      check_range(*this, "max_passes", 1, 1e12);
      break;
  }
}

std::vector<std::map<std::string, double>> grid_for(PredictorKind kind) {
  std::vector<std::map<std::string, double>> out;
  switch (kind) {
    case PredictorKind::KNN:
      for (const double k : {3.0, 5.0, 7.0, 11.0}) out.push_back({{"k", k}});
      break;
    case PredictorKind::RF:
      for (const double t : {100.0, 300.0})
        for (const double l : {1.0, 5.0}) out.push_back({{"n_trees", t}, {"min_leaf", l}});
      break;
    case PredictorKind::GBT:
      for (const double r : {100.0, 300.0})
        for (const double lr : {0.05, 0.1})
          out.push_back({{"n_rounds", r}, {"learning_rate", lr}});
      break;
    case PredictorKind::SVR:
      // gamma = 0 stands for 1/p, resolved at fit time from the feature count
      for (const double c : {1.0, 10.0})
        for (const double g : {0.0, 0.1}) out.push_back({{"C", c}, {"gamma", g}});
      break;
  }
  return out;
}

void Standardizer::fit(const DataMatrix& X) {
  mean.assign(X.p, 0.0);
  scale.assign(X.p, 1.0);
  for (int c = 0; c < X.p; ++c) {
    double s = 0.0;
    for (int r = 0; r < X.n; ++r) s += X.at(r, c);
    mean[c] = s / X.n;
    double ss = 0.0;
    for (int r = 0; r < X.n; ++r) {
      const double d = X.at(r, c) - mean[c];
      ss += d * d;
    }
    const double sd = std::sqrt(ss / X.n);
    scale[c] = sd > 0.0 ? sd : 1.0;
  }
}

void Standardizer::apply(DataMatrix& X) const {
  for (int c = 0; c < X.p; ++c)
    for (int r = 0; r < X.n; ++r) X.at(r, c) = (X.at(r, c) - mean[c]) / scale[c];
}

FeatureMatrix build_feature_matrix(const LongitudinalDataset& completed, bool include_t_days) {
  const int target = completed.schema.target_index();
  std::vector<int> cols;
  for (const int f : completed.schema.static_indices()) cols.push_back(f);
  for (const int f : completed.schema.time_varying_indices()) cols.push_back(f);

  FeatureMatrix fm;
  const int n = static_cast<int>(completed.n_records());
  const int p = static_cast<int>(cols.size()) + (include_t_days ? 1 : 0);
  fm.X.resize(n, p);
  fm.y.resize(n);
  fm.row_patients.resize(n);
  for (const int f : cols) fm.column_names.push_back(completed.schema.at(f).name);
  if (include_t_days) fm.column_names.push_back("t_days");

  for (int i = 0; i < n; ++i) {
    const auto& r = completed.records[i];
    for (size_t c = 0; c < cols.size(); ++c) {
      const double v = r.values[cols[c]];
      if (is_missing(v))
        throw DataError("build_feature_matrix: missing cell in feature '" +
                        completed.schema.at(cols[c]).name + "' (dataset not completed)");
      fm.X.at(i, static_cast<int>(c)) = v;
    }
    if (include_t_days) fm.X.at(i, p - 1) = r.t_days;
    fm.y[i] = r.values[target];
    fm.row_patients[i] = r.patient_id;
  }
  return fm;
}

std::vector<double> knn_predict(const DataMatrix& train_x, const std::vector<double>& train_y,
                                const DataMatrix& query, int k) {
  if (k < 1 || k > train_x.n)
    throw DataError("knn: k = " + std::to_string(k) + " not in [1, " +
                    std::to_string(train_x.n) + "]");
  std::vector<double> out(query.n);
  std::vector<std::pair<double, int>> dist(train_x.n);
  for (int qi = 0; qi < query.n; ++qi) {
    for (int r = 0; r < train_x.n; ++r) {
      double d2 = 0.0;
      for (int c = 0; c < train_x.p; ++c) {
        const double d = query.at(qi, c) - train_x.at(r, c);
        d2 += d * d;
      }
      dist[r] = {d2, r};
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    double s = 0.0;
    for (int i = 0; i < k; ++i) s += train_y[dist[i].second];
    out[qi] = s / k;
  }
  return out;
}

PredictorModel PredictorModel::fit(const PredictorSpec& spec_in, const FeatureMatrix& train) {
  PredictorModel m;
  m.spec_ = spec_in;
  m.spec_.validate_and_fill();
  m.train_patients_ = train.row_patients;
  std::sort(m.train_patients_.begin(), m.train_patients_.end());
  m.train_patients_.erase(std::unique(m.train_patients_.begin(), m.train_patients_.end()),
                          m.train_patients_.end());

  DataMatrix X = train.X;
  m.std_.fit(X);
  m.std_.apply(X);

  switch (m.spec_.kind) {
    case PredictorKind::KNN: {
      const int k = static_cast<int>(m.spec_.get("k"));
      if (k > X.n) throw DataError("knn: k exceeds training size");
      m.knn_x_ = std::make_shared<DataMatrix>(std::move(X));
      m.knn_y_ = std::make_shared<std::vector<double>>(train.y);
      break;
    }
    case PredictorKind::RF: {
      ForestConfig fc;
      fc.n_trees = static_cast<int>(m.spec_.get("n_trees"));
      fc.min_leaf = static_cast<int>(m.spec_.get("min_leaf"));
      fc.max_features = static_cast<int>(m.spec_.get("max_features"));
      fc.bootstrap = m.spec_.get("bootstrap") != 0.0;
      fc.binned = true;  // histogram splits; leaf members are not needed here
      fc.seed = m.spec_.seed;
      if (X.n < 2 * fc.min_leaf) throw DataError("rf: need at least 2*min_leaf rows");
      m.forest_ = std::make_shared<RegressionForest>();
      m.forest_->fit(X, train.y, fc);
      break;
    }
    case PredictorKind::GBT: {
      GbtConfig gc;
      gc.n_rounds = static_cast<int>(m.spec_.get("n_rounds"));
      gc.learning_rate = m.spec_.get("learning_rate");
      gc.max_leaves = static_cast<int>(m.spec_.get("max_leaves"));
      gc.n_bins = static_cast<int>(m.spec_.get("n_bins"));
      gc.min_leaf = static_cast<int>(m.spec_.get("min_leaf"));
      gc.seed = m.spec_.seed;
      m.gbt_ = std::make_shared<GbtModel>();
      m.gbt_->fit(X, train.y, gc);
      break;
    }
    case PredictorKind::SVR: {
      SvrConfig sc;
      sc.C = m.spec_.get("C");
      sc.epsilon = m.spec_.get("epsilon");
      sc.gamma = m.spec_.get("gamma");
      if (sc.gamma == 0.0) sc.gamma = 1.0 / X.p;  // grid placeholder for 1/p
      sc.tol = m.spec_.get("tol");
      sc.max_passes = static_cast<long>(m.spec_.get("max_passes"));
      m.svr_ = std::make_shared<SvrModel>();
      m.svr_->fit(X, train.y, sc);
      break;
    }
  }
  return m;
}

std::vector<double> PredictorModel::predict(const FeatureMatrix& rows) const {
  DataMatrix X = rows.X;
  std_.apply(X);
  std::vector<double> out(X.n);
  std::vector<double> xr(X.p);
  switch (spec_.kind) {
    case PredictorKind::KNN:
      return knn_predict(*knn_x_, *knn_y_, X, static_cast<int>(spec_.get("k")));
    case PredictorKind::RF:
      for (int i = 0; i < X.n; ++i) {
        for (int c = 0; c < X.p; ++c) xr[c] = X.at(i, c);
        out[i] = forest_->predict_row(xr.data());
      }
      return out;
    case PredictorKind::GBT:
      for (int i = 0; i < X.n; ++i) {
        for (int c = 0; c < X.p; ++c) xr[c] = X.at(i, c);
        out[i] = gbt_->predict_row(xr.data());
      }
      return out;
    case PredictorKind::SVR:
      for (int i = 0; i < X.n; ++i) {
        for (int c = 0; c < X.p; ++c) xr[c] = X.at(i, c);
        out[i] = svr_->predict_row(xr.data());
      }
      return out;
  }
  return out;
}

bool PredictorModel::svr_converged() const { return !svr_ || svr_->converged(); }

std::string PredictorModel::summary_json() const {
  nlohmann::json j;
  j["kind"] = predictor_kind_name(spec_.kind);
  j["hyperparameters"] = spec_.hyper;
  switch (spec_.kind) {
    case PredictorKind::KNN:
      j["n_train_rows"] = knn_x_->n;
      break;
    case PredictorKind::RF:
      j["n_trees"] = forest_->n_trees();
      break;
    case PredictorKind::GBT:
      j["n_rounds"] = gbt_->train_mse_per_round().size();
      break;
    case PredictorKind::SVR:
      j["n_support_vectors"] = svr_->n_support_vectors();
      j["converged"] = svr_->converged();
      break;
  }
  return j.dump();
}

}  // namespace mslong
