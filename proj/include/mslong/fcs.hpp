#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mslong/dataset.hpp"
#include "mslong/rng.hpp"

namespace mslong {

enum class FcsKernel { PMM, CART, RF, BLG, LG, LGP, LGnob };

std::string fcs_kernel_name(FcsKernel k);

struct FcsConfig {
  FcsKernel kernel = FcsKernel::PMM;
  int m = 5;          // imputation count
  int n_cycles = 10;  // sweeps over the incomplete features
  int donors = 5;     // PMM
  int n_trees = 10;   // RF
  int min_leaf = 5;   // CART / RF
  bool use_target = false;  // allow EDSS among the predictors
  uint64_t seed = 0;

  void validate() const;
};

struct Provenance {
  std::string method;
  int imputation_index = 0;  // chain index, or m for pooled outputs
  uint64_t seed = 0;
};

// Fully observed dataset plus the cells that were filled in. Methods never
// touch originally observed cells, and the imputed-cell list is what lets
// pool_mean (and the tests) hold them to that.
struct CompletedDataset {
  LongitudinalDataset dataset;
  Provenance provenance;
  std::vector<std::pair<size_t, int>> imputed_cells;  // (record index, feature)
};

struct FcsDiagnostics {
  // [chain][cycle] -> per-feature mean of that feature's imputed cells
  std::vector<std::vector<std::map<std::string, double>>> imputed_means;
};

// Chained-equations multiple imputation: initialize missing cells from the
// observed marginal, then cycle through incomplete features in ascending
// missing-rate order, redrawing each feature's missing cells with the kernel.
// Chain c runs on seed cfg.seed + c.
std::vector<CompletedDataset> fcs_impute(const LongitudinalDataset& d, const FcsConfig& cfg,
                                         FcsDiagnostics* diag = nullptr);

// Cell-wise mean of the m imputations at the originally-missing cells.
CompletedDataset pool_mean(const std::vector<CompletedDataset>& completed);

// --- draw kernels (exposed for direct testing) ---

// Donor matching step of PMM: for each predicted missing value, the donor
// row indices with nearest observed predictions (`donors` of them), one
// picked uniformly. Returns one donor index per missing row.
std::vector<int> pmm_match(const std::vector<double>& pred_obs,
                           const std::vector<double>& pred_mis, int donors, Rng& rng);

std::vector<double> kernel_pmm(const Eigen::MatrixXd& X_obs, const Eigen::VectorXd& y_obs,
                               const Eigen::MatrixXd& X_mis, int donors, Rng& rng);

std::vector<double> kernel_cart(const Eigen::MatrixXd& X_obs, const Eigen::VectorXd& y_obs,
                                const Eigen::MatrixXd& X_mis, int min_leaf, Rng& rng);

std::vector<double> kernel_rf(const Eigen::MatrixXd& X_obs, const Eigen::VectorXd& y_obs,
                              const Eigen::MatrixXd& X_mis, int n_trees, int min_leaf, Rng& rng);

std::vector<double> kernel_blg(const Eigen::MatrixXd& X_obs, const Eigen::VectorXd& y_obs,
                               const Eigen::MatrixXd& X_mis, Rng& rng);

enum class LgVariant { LG, LGP, LGnob };

std::vector<double> kernel_lg(const Eigen::MatrixXd& X_obs, const Eigen::VectorXd& y_obs,
                              const Eigen::MatrixXd& X_mis, LgVariant variant, Rng& rng);

}  // namespace mslong
