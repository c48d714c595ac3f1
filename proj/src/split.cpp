#include "mslong/split.hpp"

#include <algorithm>
#include <unordered_set>

#include "mslong/rng.hpp"

namespace mslong {

SplitAssignment split_by_patient(const LongitudinalDataset& d, double test_fraction,
                                 uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw DataError("split_by_patient: test_fraction must be in (0, 1)");
  const auto spans = d.patients();
  if (spans.size() < 2) throw DataError("split_by_patient: need at least 2 patients");

  std::vector<size_t> order(spans.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, "split"));
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.uniform_int(i)]);

  const double goal = test_fraction * static_cast<double>(d.n_records());
  SplitAssignment out;
  size_t test_count = 0;
  for (const size_t i : order) {
    if (static_cast<double>(test_count) < goal) {
      out.test_patients.push_back(spans[i].patient_id);
      test_count += spans[i].count();
    } else {
      out.train_patients.push_back(spans[i].patient_id);
    }
  }
  std::sort(out.train_patients.begin(), out.train_patients.end());
  std::sort(out.test_patients.begin(), out.test_patients.end());
  return out;
}

SplitAssignment kfold_by_patient(const LongitudinalDataset& d, int k, uint64_t seed) {
  if (k < 2) throw DataError("kfold_by_patient: k must be >= 2");
  const auto spans = d.patients();
  if (static_cast<size_t>(k) > spans.size())
    throw DataError("kfold_by_patient: k = " + std::to_string(k) + " exceeds " +
                    std::to_string(spans.size()) + " patients");

  // shuffle first so equal-sized patients break ties reproducibly but
  // differently across seeds, then stable-sort by record count descending
  std::vector<size_t> order(spans.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, "kfold"));
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.uniform_int(i)]);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return spans[a].count() > spans[b].count(); });

  SplitAssignment out;
  out.n_folds = k;
  std::vector<size_t> fold_load(k, 0);
  for (const size_t i : order) {
    int best = 0;
    for (int f = 1; f < k; ++f)
      if (fold_load[f] < fold_load[best]) best = f;
    out.fold_of[spans[i].patient_id] = best;
    fold_load[best] += spans[i].count();
  }
  return out;
}

LongitudinalDataset subset_by_patients(const LongitudinalDataset& d,
                                       const std::vector<std::string>& patient_ids) {
  std::unordered_set<std::string> keep(patient_ids.begin(), patient_ids.end());
  LongitudinalDataset out;
  out.schema = d.schema;
  for (const auto& r : d.records)
    if (keep.count(r.patient_id)) out.records.push_back(r);
  return out;
}

}  // namespace mslong
