#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>

#include "helpers.hpp"
#include "mslong/joint.hpp"
#include "mslong/mask.hpp"
#include "mslong/synth.hpp"

using namespace mslong;

namespace {

FeatureSchema univariate_schema() {
  FeatureSchema s;
  s.features = {
      {"x", FeatureKind::TimeVarying, Domain::continuous(-100, 100)},
      {"edss", FeatureKind::Target, Domain::ordinal(0, 10, 0.5)},
  };
  return s;
}

FeatureSchema small_schema(int k) {
  FeatureSchema s;
  for (int i = 0; i < k; ++i)
    s.features.push_back(
        {"f" + std::to_string(i), FeatureKind::TimeVarying, Domain::continuous(-100, 100)});
  s.features.push_back({"edss", FeatureKind::Target, Domain::ordinal(0, 10, 0.5)});
  return s;
}

}  // namespace

TEST_CASE("conditional_normal edge cases and the bivariate formula") {
  Eigen::VectorXd mu(2);
  mu << 1.0, 2.0;
  Eigen::MatrixXd sigma(2, 2);
  const double s1 = 2.0, s2 = 3.0, rho = 0.5;
  sigma << s1 * s1, rho * s1 * s2, rho * s1 * s2, s2 * s2;

  const auto [m0, c0] = conditional_normal(mu, sigma, {}, Eigen::VectorXd(0));
  CHECK(m0 == mu);
  CHECK(c0 == sigma);

  Eigen::VectorXd both(2);
  both << 1.0, 2.0;
  const auto [m2, c2] = conditional_normal(mu, sigma, {0, 1}, both);
  CHECK(m2.size() == 0);
  CHECK(c2.size() == 0);

  Eigen::VectorXd obs(1);
  obs << 5.0;
  const auto [m1, c1] = conditional_normal(mu, sigma, {1}, obs);
  REQUIRE(m1.size() == 1);
  // mu1 + rho (s1/s2)(v - mu2) = 1 + 0.5*(2/3)*3 = 2
  CHECK(m1[0] == doctest::Approx(2.0).epsilon(1e-12));
  // s1^2 (1 - rho^2) = 3
  CHECK(c1(0, 0) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("jm with zero missing cells returns its input bitwise") {
  CohortGenConfig cfg;
  cfg.n_patients = 15;
  cfg.visits_per_patient = {3, 5};
  cfg.seed = 91;
  const auto d = generate_cohort(cfg).first;
  for (const auto level : {JmLevel::Single, JmLevel::Clustered, JmLevel::Lg}) {
    JmConfig jc;
    jc.level = level;
    jc.n_burn = 20;
    jc.n_between = 5;
    jc.m = 2;
    jc.seed = 17;
    const auto out = jm_impute(d, jc);
    REQUIRE(out.size() == 2);
    for (const auto& c : out) CHECK(testutil::datasets_equal_bitwise(c.dataset, d));
  }
}

TEST_CASE("jm chain is deterministic given the seed") {
  CohortGenConfig cfg;
  cfg.n_patients = 12;
  cfg.visits_per_patient = {4, 6};
  cfg.seed = 93;
  const auto complete = generate_cohort(cfg).first;
  auto [masked, plan] = apply_mask(complete, table1_rates(), MaskMechanism::MCAR, 94);

  JmConfig jc;
  jc.level = JmLevel::Clustered;
  jc.n_burn = 30;
  jc.n_between = 5;
  jc.m = 3;
  jc.seed = 95;
  JmDiagnostics d1, d2;
  const auto a = jm_impute(masked, jc, &d1);
  const auto b = jm_impute(masked, jc, &d2);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i)
    CHECK(testutil::datasets_equal_bitwise(a[i].dataset, b[i].dataset));
  CHECK(d1.n_accepted == d2.n_accepted);  // acceptance decisions replay exactly
  CHECK(d1.trace == d2.trace);

  // observed cells never modified; all gaps filled
  for (const auto& c : a) {
    CHECK(c.dataset.n_missing_cells() == 0);
    for (size_t i = 0; i < masked.records.size(); ++i)
      for (size_t f = 0; f < masked.schema.size(); ++f)
        if (!is_missing(masked.records[i].values[f]))
          CHECK(testutil::cells_equal_bitwise(c.dataset.records[i].values[f],
                                              masked.records[i].values[f]));
  }
}

TEST_CASE("jm univariate single-level matches the posterior-predictive oracle") {
  // x ~ N(mu, sigma^2), 20% MCAR, n = 500
  const double mu = 2.0, sigma = 1.0;
  LongitudinalDataset d;
  d.schema = univariate_schema();
  Rng gen(101);
  for (int pat = 0; pat < 50; ++pat) {
    for (int v = 0; v < 10; ++v) {
      VisitRecord r;
      r.patient_id = "p" + std::to_string(pat + 1);
      r.t_days = v * 30;
      r.values = {gen.normal(mu, sigma), 3.0};
      d.records.push_back(std::move(r));
    }
  }
  auto [masked, plan] = apply_mask(d, {{"x", 0.2}}, MaskMechanism::MCAR, 102);
  REQUIRE(plan.cells.size() == 100);

  JmConfig jc;
  jc.level = JmLevel::Single;
  jc.n_burn = 200;
  jc.n_between = 5;
  jc.m = 200;
  jc.seed = 103;
  JmDiagnostics diag;
  const auto draws = jm_impute(masked, jc, &diag);
  REQUIRE(draws.size() == 200);

  // grand mean over all imputed cells and draws: within 3*sigma/sqrt(0.2 n)
  double grand = 0.0;
  for (const auto& c : draws)
    for (const auto& cell : plan.cells) grand += c.dataset.records[cell.record_idx].values[0];
  grand /= static_cast<double>(draws.size() * plan.cells.size());
  CHECK(std::abs(grand - mu) <= 3.0 * sigma / std::sqrt(0.2 * 500.0));

  // per-cell mean of the 200 draws within 3 sigma of mu
  for (const auto& cell : plan.cells) {
    double cell_mean = 0.0;
    for (const auto& c : draws) cell_mean += c.dataset.records[cell.record_idx].values[0];
    cell_mean /= static_cast<double>(draws.size());
    CHECK(std::abs(cell_mean - mu) <= 3.0 * sigma);
  }

  // every emitted residual covariance factors
  for (const auto& s : diag.emitted_sigma_e) {
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("jm clustered shrinks sigma_u under the null model") {
  // all patients share one distribution: true random-intercept variance 0
  LongitudinalDataset d;
  d.schema = small_schema(3);
  Rng gen(111);
  for (int pat = 0; pat < 100; ++pat) {
    for (int v = 0; v < 10; ++v) {
      VisitRecord r;
      r.patient_id = "p" + std::to_string(pat + 1);
      r.t_days = v * 30;
      r.values = {gen.normal(0, 1), gen.normal(0, 1), gen.normal(0, 1), 3.0};
      d.records.push_back(std::move(r));
    }
  }
  auto [masked, plan] =
      apply_mask(d, {{"f0", 0.1}, {"f1", 0.1}, {"f2", 0.1}}, MaskMechanism::MCAR, 112);

  JmConfig jc;
  jc.level = JmLevel::Clustered;
  jc.n_burn = 150;
  jc.n_between = 5;
  jc.m = 30;
  jc.seed = 113;
  JmDiagnostics diag;
  jm_impute(masked, jc, &diag);

  std::vector<double> su, se;
  for (const auto& s : diag.emitted_sigma_u)
    for (int i = 0; i < s.rows(); ++i) su.push_back(s(i, i));
  for (const auto& s : diag.emitted_sigma_e)
    for (int i = 0; i < s.rows(); ++i) se.push_back(s(i, i));
  std::sort(su.begin(), su.end());
  std::sort(se.begin(), se.end());
  const double med_u = su[su.size() / 2];
  const double med_e = se[se.size() / 2];
  CHECK(med_u < 0.1 * med_e);

  // acceptance rate strictly inside (0, 1) at the default step
  CHECK(diag.acceptance_rate() > 0.0);
  CHECK(diag.acceptance_rate() < 1.0);
}

TEST_CASE("mh_update_sigma_u acceptance behavior") {
  const int p = 3;
  Rng gen(121);
  JmState state;
  state.sigma_u = Eigen::MatrixXd::Identity(p, p) * 0.5;
  state.sigma_e = Eigen::MatrixXd::Identity(p, p);
  for (int j = 0; j < 50; ++j) {
    Eigen::VectorXd u(p);
    for (int i = 0; i < p; ++i) u[i] = gen.normal(0.0, std::sqrt(0.5));
    state.u.push_back(u);
  }

  // tiny step: proposal ~= current, acceptance -> 1
  JmConfig tiny;
  tiny.level = JmLevel::Clustered;
  tiny.mh_step = 1e-4;
  Rng rng_tiny(122);
  int accepted = 0;
  for (int it = 0; it < 1000; ++it)
    if (mh_update_sigma_u(state, tiny, rng_tiny)) ++accepted;
  CHECK(accepted > 900);

  // accepted draws always factor
  Eigen::LLT<Eigen::MatrixXd> llt(state.sigma_u);
  CHECK(llt.info() == Eigen::Success);

  // a rejected step leaves the state bitwise untouched
  JmConfig huge;
  huge.level = JmLevel::Clustered;
  huge.mh_step = 200.0;
  Rng rng_huge(123);
  bool saw_rejection = false;
  for (int it = 0; it < 200 && !saw_rejection; ++it) {
    const Eigen::MatrixXd before = state.sigma_u;
    if (!mh_update_sigma_u(state, huge, rng_huge)) {
      saw_rejection = true;
      CHECK(state.sigma_u == before);
    }
  }
  CHECK(saw_rejection);
}

TEST_CASE("jm divergence and validation errors") {
  JmConfig jc;
  jc.n_burn = 0;
  CHECK_THROWS_AS(jc.validate(), DataError);

  const auto tiny = testutil::from_csv("p1,0,1,40,0,1,2,2,2,2,2,2,3,3\n");
  JmConfig ok;
  ok.level = JmLevel::Clustered;
  CHECK_THROWS_AS(jm_impute(tiny, ok), DataError);  // clustered needs >= 2 patients
}
