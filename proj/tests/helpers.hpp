#pragma once

#include <cstring>
#include <sstream>
#include <string>

#include "mslong/csv.hpp"
#include "mslong/dataset.hpp"

namespace testutil {

inline const char* kHeader =
    "patient_id,t_days,sex,age,pediatric_onset,pyramidal,cerebellar,brainstem,sensory,"
    "sphincteric,visual,mental,deambulation,edss";

inline mslong::LongitudinalDataset from_csv(const std::string& body) {
  std::istringstream in(std::string(kHeader) + "\n" + body);
  return mslong::load_csv(in, mslong::FeatureSchema::default_schema());
}

inline bool cells_equal_bitwise(double a, double b) {
  return std::memcmp(&a, &b, sizeof(double)) == 0 ||
         (mslong::is_missing(a) && mslong::is_missing(b));
}

inline bool datasets_equal_bitwise(const mslong::LongitudinalDataset& a,
                                   const mslong::LongitudinalDataset& b) {
  if (a.records.size() != b.records.size()) return false;
  for (size_t i = 0; i < a.records.size(); ++i) {
    if (a.records[i].patient_id != b.records[i].patient_id) return false;
    if (a.records[i].t_days != b.records[i].t_days) return false;
    if (a.records[i].values.size() != b.records[i].values.size()) return false;
    for (size_t f = 0; f < a.records[i].values.size(); ++f)
      if (!cells_equal_bitwise(a.records[i].values[f], b.records[i].values[f])) return false;
  }
  return true;
}

}  // namespace testutil
