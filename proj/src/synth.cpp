#include "mslong/synth.hpp"

#include <algorithm>
#include <cmath>

#include "mslong/rng.hpp"

namespace mslong {

Trajectory trajectory_from(const std::string& name) {
  if (name == "piecewise_linear") return Trajectory::PiecewiseLinear;
  if (name == "random_walk") return Trajectory::RandomWalk;
  if (name == "mvn_latent") return Trajectory::MvnLatent;
  throw DataError("unknown trajectory '" + name + "'");
}

std::string trajectory_name(Trajectory t) {
  switch (t) {
    case Trajectory::PiecewiseLinear: return "piecewise_linear";
    case Trajectory::RandomWalk: return "random_walk";
    case Trajectory::MvnLatent: return "mvn_latent";
  }
  return "?";
}

void CohortGenConfig::validate() const {
  if (n_patients < 1) throw DataError("cohort: n_patients must be >= 1");
  if (visits_per_patient.first < 1 || visits_per_patient.second < visits_per_patient.first)
    throw DataError("cohort: invalid visits_per_patient range");
  if (visit_gap_days.first < 1 || visit_gap_days.second < visit_gap_days.first)
    throw DataError("cohort: visit gaps must be positive");
  if (noise_sd < 0.0 || edss_noise_sd < 0.0) throw DataError("cohort: noise sd must be >= 0");
  for (const auto& [name, r] : missing_rates)
    if (r < 0.0 || r > 0.9)
      throw DataError("cohort: missing rate for '" + name + "' outside [0, 0.9]");
}

double edss_from_subscores(const std::vector<double>& fs_values, double deambulation,
                           double noise) {
  double mx = 0.0, mean = 0.0;
  for (const double v : fs_values) {
    mx = std::max(mx, v);
    mean += v;
  }
  mean /= static_cast<double>(fs_values.size());
  const double raw = 0.55 * deambulation + 0.30 * mx + 0.15 * mean + noise;
  const double snapped = 0.5 * std::round(2.0 * raw);
  return std::min(10.0, std::max(0.0, snapped));
}

std::pair<LongitudinalDataset, LongitudinalDataset> generate_cohort(const CohortGenConfig& cfg) {
  cfg.validate();
  const FeatureSchema schema = FeatureSchema::default_schema();
  const auto tv = schema.time_varying_indices();
  const int deamb_col = schema.index_of("deambulation");
  const int edss_col = schema.target_index();
  const int sex_col = schema.index_of("sex");
  const int age_col = schema.index_of("age");
  const int ped_col = schema.index_of("pediatric_onset");

  LongitudinalDataset d;
  d.schema = schema;

  const int digits = std::max(4, static_cast<int>(std::to_string(cfg.n_patients).size()));

  for (int pat = 0; pat < cfg.n_patients; ++pat) {
    Rng rng(derive_seed(cfg.seed, "patient/" + std::to_string(pat)));
    std::string pid = std::to_string(pat + 1);
    pid = "p" + std::string(digits - pid.size(), '0') + pid;

    const double sex = rng.bernoulli(0.5) ? 1.0 : 0.0;
    const double age0 = std::min(80.0, std::max(18.0, rng.normal(38.0, 11.0)));
    const double pediatric = rng.bernoulli(0.05) ? 1.0 : 0.0;

    const int n_visits =
        cfg.visits_per_patient.first +
        static_cast<int>(rng.uniform_int(cfg.visits_per_patient.second -
                                         cfg.visits_per_patient.first + 1));
    std::vector<int> t(n_visits, 0);
    for (int v = 1; v < n_visits; ++v)
      t[v] = t[v - 1] + cfg.visit_gap_days.first +
             static_cast<int>(rng.uniform_int(cfg.visit_gap_days.second -
                                              cfg.visit_gap_days.first + 1));

    const double severity = rng.normal();

    // per-feature trajectories over the visit grid
    std::vector<std::vector<double>> traj(tv.size(), std::vector<double>(n_visits));
    for (size_t fi = 0; fi < tv.size(); ++fi) {
      const Domain& dom = schema.at(tv[fi]).domain;
      const double span = dom.hi - dom.lo;
      const double mid = 0.5 * (dom.lo + dom.hi);
      auto clamp = [&](double v) { return std::min(dom.hi, std::max(dom.lo, v)); };

      switch (cfg.trajectory) {
        case Trajectory::PiecewiseLinear: {
          // endpoints drawn in-domain, so the noiseless series is exactly
          // affine in t with no clamping anywhere in between
          const double start = clamp(mid + severity * span / 6.0 + rng.normal(0.0, span / 8.0));
          const double end = clamp(start + rng.normal(span / 10.0, span / 6.0));
          const double slope = t.back() > 0 ? (end - start) / t.back() : 0.0;
          for (int v = 0; v < n_visits; ++v) {
            // endpoints are in-domain, so this clamp only absorbs the last-ulp
            // rounding of start + slope*t and the series stays affine to 1e-9
            double val = start + slope * t[v];
            if (cfg.noise_sd > 0.0) val += rng.normal(0.0, cfg.noise_sd);
            traj[fi][v] = clamp(val);
          }
          break;
        }
        case Trajectory::RandomWalk: {
          double val = clamp(mid + severity * span / 6.0 + rng.normal(0.0, span / 8.0));
          for (int v = 0; v < n_visits; ++v) {
            if (v > 0) val = clamp(val + rng.normal(0.0, cfg.noise_sd));
            traj[fi][v] = val;
          }
          break;
        }
        case Trajectory::MvnLatent: {
          const double base = mid + severity * span / 6.0 + rng.normal(0.0, span / 8.0);
          const double slope = rng.normal(0.2, 0.15) * span / 6.0;  // per year
          for (int v = 0; v < n_visits; ++v) traj[fi][v] = base + slope * (t[v] / 365.25);
          break;
        }
      }
    }
    if (cfg.trajectory == Trajectory::MvnLatent) {
      // compound-symmetry latent noise: shared + independent component
      for (int v = 0; v < n_visits; ++v) {
        const double shared = rng.normal();
        for (size_t fi = 0; fi < tv.size(); ++fi) {
          const Domain& dom = schema.at(tv[fi]).domain;
          const double z = std::sqrt(0.4) * shared + std::sqrt(0.6) * rng.normal();
          const double scale = cfg.noise_sd * (dom.hi - dom.lo) / 6.0;
          traj[fi][v] =
              std::min(dom.hi, std::max(dom.lo, traj[fi][v] + scale * z));
        }
      }
    }

    for (int v = 0; v < n_visits; ++v) {
      VisitRecord r;
      r.patient_id = pid;
      r.t_days = t[v];
      r.values.assign(schema.size(), 0.0);
      r.values[sex_col] = sex;
      r.values[age_col] = age0 + t[v] / 365.25;
      r.values[ped_col] = pediatric;
      std::vector<double> others;
      double deamb = 0.0;
      for (size_t fi = 0; fi < tv.size(); ++fi) {
        r.values[tv[fi]] = traj[fi][v];
        if (tv[fi] == deamb_col)
          deamb = traj[fi][v];
        else
          others.push_back(traj[fi][v]);
      }
      const double noise = cfg.edss_noise_sd > 0.0 ? rng.normal(0.0, cfg.edss_noise_sd) : 0.0;
      r.values[edss_col] = edss_from_subscores(others, deamb, noise);
      d.records.push_back(std::move(r));
    }
  }

  d.validate();
  LongitudinalDataset truth = d;
  return {std::move(d), std::move(truth)};
}

std::pair<LongitudinalDataset, MaskPlan> degrade(const LongitudinalDataset& complete,
                                                 const std::map<std::string, double>& rates,
                                                 MaskMechanism mechanism, uint64_t seed) {
  return apply_mask(complete, rates, mechanism, seed);
}

}  // namespace mslong
