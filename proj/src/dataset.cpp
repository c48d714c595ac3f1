#include "mslong/dataset.hpp"

#include <set>
#include <unordered_set>

namespace mslong {

void LongitudinalDataset::validate(bool require_baseline) const {
  schema.validate();
  const int target = schema.target_index();
  const size_t p = schema.size();

  std::unordered_set<std::string> closed;  // patients whose block has ended
  size_t i = 0;
  while (i < records.size()) {
    const std::string& pid = records[i].patient_id;
    if (pid.empty()) throw DataError("record " + std::to_string(i) + ": empty patient id");
    if (closed.count(pid))
      throw DataError("patient '" + pid + "': records not contiguous");

    size_t j = i;
    int prev_t = std::numeric_limits<int>::min();
    for (; j < records.size() && records[j].patient_id == pid; ++j) {
      const VisitRecord& r = records[j];
      if (r.values.size() != p)
        throw DataError("patient '" + pid + "': record has " + std::to_string(r.values.size()) +
                        " cells, schema has " + std::to_string(p));
      if (r.t_days < 0) throw DataError("patient '" + pid + "': negative t_days");
      if (j == i && require_baseline && r.t_days != 0)
        throw DataError("patient '" + pid + "': first visit must have t_days = 0");
      if (r.t_days == prev_t)
        throw DataError("patient '" + pid + "': duplicate t_days " + std::to_string(r.t_days));
      if (r.t_days < prev_t)
        throw DataError("patient '" + pid + "': t_days not increasing");
      prev_t = r.t_days;

      for (size_t f = 0; f < p; ++f) {
        const Feature& feat = schema.at(f);
        const double v = r.values[f];
        if (is_missing(v)) {
          if (feat.kind == FeatureKind::Static)
            throw DataError("patient '" + pid + "': static feature '" + feat.name + "' missing");
          if (static_cast<int>(f) == target)
            throw DataError("patient '" + pid + "': target '" + feat.name + "' missing");
          continue;
        }
        if (!feat.domain.contains(v))
          throw DataError("patient '" + pid + "': '" + feat.name + "' value " +
                          std::to_string(v) + " out of domain [" + std::to_string(feat.domain.lo) +
                          ", " + std::to_string(feat.domain.hi) + "]");
      }

      // Binary statics must be constant across the patient's visits. Age is
      // exempt: it may be stored as age-at-visit, which drifts with t_days.
      for (const int f : schema.static_indices()) {
        if (schema.at(f).name == "age") continue;
        if (r.values[f] != records[i].values[f])
          throw DataError("patient '" + pid + "': static feature '" + schema.at(f).name +
                          "' varies across visits");
      }
    }
    closed.insert(pid);
    i = j;
  }
}

LongitudinalDataset complete_case_subset(const LongitudinalDataset& d) {
  LongitudinalDataset out;
  out.schema = d.schema;
  for (const auto& r : d.records) {
    bool complete = true;
    for (const double v : r.values)
      if (is_missing(v)) {
        complete = false;
        break;
      }
    if (complete) out.records.push_back(r);
  }
  if (out.records.empty()) throw DataError("empty complete-case subset");
  return out;
}

}  // namespace mslong
