#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mslong/schema.hpp"

namespace mslong {

inline double missing_value() { return std::numeric_limits<double>::quiet_NaN(); }
inline bool is_missing(double v) { return std::isnan(v); }

struct VisitRecord {
  std::string patient_id;
  int t_days = 0;               // days since this patient's first visit
  std::vector<double> values;   // one cell per schema feature; NaN = missing
};

// Contiguous block of one patient's records inside LongitudinalDataset::records.
struct PatientSpan {
  std::string patient_id;
  size_t begin = 0;
  size_t end = 0;  // half-open
  size_t count() const { return end - begin; }
};

struct LongitudinalDataset {
  FeatureSchema schema;
  std::vector<VisitRecord> records;  // grouped per patient, ascending t_days

  size_t n_records() const { return records.size(); }

  // Patient blocks in first-appearance order.
  std::vector<PatientSpan> patients() const {
    std::vector<PatientSpan> out;
    size_t i = 0;
    while (i < records.size()) {
      size_t j = i;
      while (j < records.size() && records[j].patient_id == records[i].patient_id) ++j;
      out.push_back({records[i].patient_id, i, j});
      i = j;
    }
    return out;
  }

  size_t n_patients() const { return patients().size(); }

  size_t n_missing_cells() const {
    size_t n = 0;
    for (const auto& r : records)
      for (const double v : r.values)
        if (is_missing(v)) ++n;
    return n;
  }

  // Full invariant check. `require_baseline` additionally demands that every
  // patient's first record sits at t_days = 0 (holds for loaded/generated
  // data; record subsets such as the complete-case view keep original t_days).
  void validate(bool require_baseline = true) const;
};

// Records with zero missing cells; patients left empty are dropped.
// Throws DataError if nothing remains.
LongitudinalDataset complete_case_subset(const LongitudinalDataset& d);

}  // namespace mslong
