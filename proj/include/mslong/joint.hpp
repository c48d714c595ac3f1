#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "mslong/dataset.hpp"
#include "mslong/fcs.hpp"  // CompletedDataset

namespace mslong {

// Joint multivariate-normal imputation flavors:
//   Single    - one joint normal over the incomplete features AND the
//               covariates (intercept-only mean), norm-package style;
//   Clustered - regression joint model plus a per-patient random intercept
//               vector, its covariance updated by Metropolis-Hastings;
//   Lg        - regression joint model: covariates enter only as fixed
//               effects, no joint distribution over them.
enum class JmLevel { Single, Clustered, Lg };

std::string jm_level_name(JmLevel level);

struct JmConfig {
  JmLevel level = JmLevel::Single;
  int n_burn = 1000;
  int n_between = 100;
  int m = 5;
  double mh_step = 0.1;  // random-walk scale on the log-Cholesky parameters
  bool use_target = false;
  uint64_t seed = 0;

  void validate() const;
};

struct JmState {
  Eigen::MatrixXd beta;             // q x p fixed effects
  std::vector<Eigen::VectorXd> u;   // per-cluster random intercepts (clustered)
  Eigen::MatrixXd sigma_e;          // p x p residual covariance
  Eigen::MatrixXd sigma_u;          // p x p random-effect covariance (clustered)
  Eigen::MatrixXd y_complete;       // n x p current completed responses
};

struct JmDiagnostics {
  long n_proposed = 0;
  long n_accepted = 0;
  // one row per iteration: [iteration, accepted, diag(sigma_e)..., diag(sigma_u)...]
  std::vector<std::vector<double>> trace;
  std::vector<std::string> trace_header;
  // covariance state at each emitted draw
  std::vector<Eigen::MatrixXd> emitted_sigma_e;
  std::vector<Eigen::MatrixXd> emitted_sigma_u;
  double acceptance_rate() const {
    return n_proposed == 0 ? 0.0 : double(n_accepted) / double(n_proposed);
  }
};

// Gibbs sampler; emits a completed dataset every n_between iterations after
// n_burn, until m are collected.
std::vector<CompletedDataset> jm_impute(const LongitudinalDataset& d, const JmConfig& cfg,
                                        JmDiagnostics* diag = nullptr);

// Schur-complement conditioning of N(mu, sigma) on the observed coordinates.
// Returns the conditional mean and covariance of the remaining coordinates.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> conditional_normal(
    const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
    const std::vector<int>& observed_idx, const Eigen::VectorXd& observed_vals);

// One random-walk Metropolis-Hastings step on sigma_u in the log-Cholesky
// parameterization. Mutates the state only on acceptance; returns whether the
// proposal was accepted. The per-parameter step is mh_step / sqrt(#clusters).
bool mh_update_sigma_u(JmState& state, const JmConfig& cfg, Rng& rng);

}  // namespace mslong
