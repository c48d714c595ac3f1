#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>

#include "mslong/dataset.hpp"
#include "mslong/mask.hpp"

namespace mslong {

enum class Trajectory { PiecewiseLinear, RandomWalk, MvnLatent };

Trajectory trajectory_from(const std::string& name);
std::string trajectory_name(Trajectory t);

// Synthetic MS-like cohort on the default schema. The EDSS formula is a
// stylized stand-in for scoring rules (deambulation dominates), not a
// clinical rule set.
struct CohortGenConfig {
  int n_patients = 919;
  std::pair<int, int> visits_per_patient{10, 20};
  std::pair<int, int> visit_gap_days{30, 180};
  Trajectory trajectory = Trajectory::MvnLatent;
  double noise_sd = 0.3;       // trajectory noise / walk step / latent scale
  double edss_noise_sd = 0.3;  // noise inside the EDSS formula, before rounding
  std::map<std::string, double> missing_rates = table1_rates();
  uint64_t seed = 0;

  void validate() const;
};

// Returns (complete, truth): two identical fully observed datasets; the
// second is kept by callers as the masking ground truth.
std::pair<LongitudinalDataset, LongitudinalDataset> generate_cohort(const CohortGenConfig& cfg);

// One-step degraded cohort: apply_mask with the config rates.
std::pair<LongitudinalDataset, MaskPlan> degrade(const LongitudinalDataset& complete,
                                                 const std::map<std::string, double>& rates,
                                                 MaskMechanism mechanism, uint64_t seed);

// The generator's EDSS formula, exposed so tests can recompute the target.
double edss_from_subscores(const std::vector<double>& fs_values, double deambulation,
                           double noise);

}  // namespace mslong
