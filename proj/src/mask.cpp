#include "mslong/mask.hpp"

#include <algorithm>
#include <cmath>

#include "mslong/rng.hpp"

namespace mslong {

std::map<std::string, double> table1_rates() {
  return {
      {"pyramidal", 0.1128}, {"cerebellar", 0.1327},   {"brainstem", 0.1322},
      {"sensory", 0.1277},   {"sphincteric", 0.1353},  {"visual", 0.1370},
      {"mental", 0.1384},    {"deambulation", 0.1473},
  };
}

namespace {

// Weighted sampling without replacement (Efraimidis-Spirakis keys).
std::vector<size_t> weighted_sample(const std::vector<double>& weights, size_t k, Rng& rng) {
  std::vector<std::pair<double, size_t>> keys;
  keys.reserve(weights.size());
  for (size_t i = 0; i < weights.size(); ++i) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    keys.emplace_back(std::pow(u, 1.0 / weights[i]), i);
  }
  std::sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<size_t> out(k);
  for (size_t i = 0; i < k; ++i) out[i] = keys[i].second;
  return out;
}

}  // namespace

std::pair<LongitudinalDataset, MaskPlan> apply_mask(const LongitudinalDataset& d,
                                                    const std::map<std::string, double>& rates,
                                                    MaskMechanism mechanism, uint64_t seed) {
  const size_t n = d.n_records();
  const int target = d.schema.target_index();

  for (const auto& [name, rate] : rates) {
    const int f = d.schema.index_of(name);
    if (f < 0) throw DataError("apply_mask: unknown feature '" + name + "'");
    if (d.schema.at(f).kind != FeatureKind::TimeVarying)
      throw DataError("apply_mask: rate given for non-maskable feature '" + name + "'");
    if (rate < 0.0 || rate > 0.9)
      throw DataError("apply_mask: rate for '" + name + "' outside [0, 0.9]");
    for (size_t i = 0; i < n; ++i)
      if (is_missing(d.records[i].values[f]))
        throw DataError("apply_mask: feature '" + name + "' already has missing cells");
  }

  LongitudinalDataset masked = d;
  MaskPlan plan;
  plan.per_feature_rate = rates;
  plan.seed = seed;
  plan.mechanism = mechanism;

  const auto spans = d.patients();

  // iterate features in schema order for a reproducible plan layout
  for (const auto& feat : d.schema.features) {
    const auto it = rates.find(feat.name);
    if (it == rates.end()) continue;
    const int f = d.schema.index_of(feat.name);
    const size_t k = static_cast<size_t>(std::llround(it->second * static_cast<double>(n)));
    if (k == 0) continue;

    Rng rng(derive_seed(seed, "mask/" + feat.name));
    std::vector<size_t> chosen;
    if (mechanism == MaskMechanism::MCAR) {
      rng.sample_without_replacement(n, k, std::back_inserter(chosen));
    } else {
      std::vector<double> w(n);
      for (size_t i = 0; i < n; ++i) {
        const double edss = d.records[i].values[target];
        w[i] = 1.0 / (1.0 + std::exp(-(edss - 4.0)));
      }
      chosen = weighted_sample(w, k, rng);
    }

    // Repair draws that blank a whole patient-feature series: release one
    // cell of each blanked series and re-mask an equally sized replacement
    // drawn from series that keep at least one observed cell. Count stays
    // exactly k; the rate errors out only when no valid mask exists at all.
    std::vector<char> hit(n, 0);
    for (const size_t i : chosen) hit[i] = 1;
    std::vector<size_t> series_of(n, 0), unmasked(spans.size(), 0);
    for (size_t s = 0; s < spans.size(); ++s)
      for (size_t i = spans[s].begin; i < spans[s].end; ++i) {
        series_of[i] = s;
        if (!hit[i]) ++unmasked[s];
      }
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      std::vector<size_t> blanked;
      for (size_t s = 0; s < spans.size(); ++s)
        if (unmasked[s] == 0) blanked.push_back(s);
      if (blanked.empty()) {
        ok = true;
        break;
      }
      for (const size_t s : blanked) {
        std::vector<size_t> masked_here;
        for (size_t i = spans[s].begin; i < spans[s].end; ++i)
          if (hit[i]) masked_here.push_back(i);
        const size_t release = masked_here[rng.uniform_int(masked_here.size())];
        hit[release] = 0;
        ++unmasked[s];
      }
      std::vector<size_t> eligible;
      for (size_t i = 0; i < n; ++i)
        if (!hit[i] && unmasked[series_of[i]] >= 2) eligible.push_back(i);
      if (eligible.size() < blanked.size()) break;  // no valid mask at this rate
      std::vector<size_t> picks;
      rng.sample_without_replacement(eligible.size(), blanked.size(),
                                     std::back_inserter(picks));
      for (const size_t p : picks) {
        hit[eligible[p]] = 1;
        --unmasked[series_of[eligible[p]]];
      }
    }
    if (!ok)
      throw DataError("apply_mask: rate " + std::to_string(it->second) + " for '" + feat.name +
                      "' leaves a patient with no observed values (100 repair rounds tried)");

    chosen.clear();
    for (size_t i = 0; i < n; ++i)
      if (hit[i]) chosen.push_back(i);
    for (const size_t i : chosen) {
      MaskedCell c;
      c.record_idx = i;
      c.feature = f;
      c.patient_id = d.records[i].patient_id;
      c.t_days = d.records[i].t_days;
      c.true_value = d.records[i].values[f];
      plan.cells.push_back(std::move(c));
      masked.records[i].values[f] = missing_value();
    }
  }

  return {std::move(masked), std::move(plan)};
}

}  // namespace mslong
