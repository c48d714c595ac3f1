#pragma once

#include <vector>

#include "mslong/tree.hpp"  // DataMatrix

namespace mslong {

struct SvrConfig {
  double C = 1.0;
  double epsilon = 0.1;
  double gamma = 0.1;   // RBF kernel exp(-gamma * ||x - x'||^2)
  double tol = 1e-3;   // KKT tolerance
  long max_passes = 40000;  // pairwise update budget
  size_t cache_mb = 768;    // kernel column cache (full float Gram to ~13k rows)
};

// Epsilon-SVR trained by sequential pairwise optimization of the dual
// coefficients beta_i = alpha_i - alpha*_i in [-C, C] with sum(beta) = 0.
// Each step picks the maximal KKT-violating pair and solves the 1-D
// piecewise-quadratic subproblem exactly.
class SvrModel {
 public:
  void fit(const DataMatrix& X, const std::vector<double>& y, const SvrConfig& cfg);
  double predict_row(const double* x) const;

  bool converged() const { return converged_; }
  double bias() const { return b_; }
  const std::vector<double>& beta() const { return beta_; }  // one per training row
  long iterations() const { return iterations_; }
  size_t n_support_vectors() const { return sv_beta_.size(); }

 private:
  DataMatrix train_;  // support vectors (rows with beta != 0)
  std::vector<double> sv_beta_;
  std::vector<double> beta_;
  double b_ = 0.0;
  double gamma_ = 0.1;
  bool converged_ = false;
  long iterations_ = 0;
};

}  // namespace mslong
