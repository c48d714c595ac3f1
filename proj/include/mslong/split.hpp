#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mslong/dataset.hpp"

namespace mslong {

// Patient-level assignment: either a train/test split or a k-fold map,
// depending on which operation produced it. Patients never straddle sets.
struct SplitAssignment {
  std::vector<std::string> train_patients;  // sorted
  std::vector<std::string> test_patients;   // sorted
  std::map<std::string, int> fold_of;       // k-fold mode only
  int n_folds = 0;
};

// Shuffles patients deterministically and assigns them to the test set until
// the test record count first reaches test_fraction * total records.
SplitAssignment split_by_patient(const LongitudinalDataset& d, double test_fraction,
                                 uint64_t seed);

// Greedy largest-first balancing of patients into k folds by record count.
SplitAssignment kfold_by_patient(const LongitudinalDataset& d, int k, uint64_t seed);

// Records of the listed patients, in dataset order.
LongitudinalDataset subset_by_patients(const LongitudinalDataset& d,
                                       const std::vector<std::string>& patient_ids);

}  // namespace mslong
