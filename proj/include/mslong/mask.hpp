#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mslong/dataset.hpp"

namespace mslong {

enum class MaskMechanism { MCAR, MAR };

struct MaskedCell {
  size_t record_idx = 0;   // index into the source/masked dataset's records
  int feature = -1;        // schema feature index
  std::string patient_id;
  int t_days = 0;
  double true_value = 0.0;
};

// The deliberately hidden cells with their ground truth; drives the RMSE
// scoring of the imputation benchmark.
struct MaskPlan {
  std::vector<MaskedCell> cells;
  std::map<std::string, double> per_feature_rate;
  uint64_t seed = 0;
  MaskMechanism mechanism = MaskMechanism::MCAR;
};

// Per-feature missing rates from the source registry description.
std::map<std::string, double> table1_rates();

// Hides exactly round(rate_f * n_records) observed cells per feature. MCAR
// picks uniformly; MAR weights selection by logistic(EDSS - 4). A draw that
// would blank an entire patient-feature series is retried (up to 100 times
// per feature). Requires the maskable features to be fully observed.
std::pair<LongitudinalDataset, MaskPlan> apply_mask(const LongitudinalDataset& d,
                                                    const std::map<std::string, double>& rates,
                                                    MaskMechanism mechanism, uint64_t seed);

}  // namespace mslong
