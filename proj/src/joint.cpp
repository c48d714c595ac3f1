#include "mslong/joint.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mslong/regress.hpp"

namespace mslong {

std::string jm_level_name(JmLevel level) {
  switch (level) {
    case JmLevel::Single: return "jm_single";
    case JmLevel::Clustered: return "jm_clustered";
    case JmLevel::Lg: return "jm_lg";
  }
  return "?";
}

void JmConfig::validate() const {
  if (n_burn < 1) throw DataError("jm: n_burn must be >= 1");
  if (n_between < 1) throw DataError("jm: n_between must be >= 1");
  if (m < 1) throw DataError("jm: m must be >= 1");
  if (!(mh_step > 0.0)) throw DataError("jm: mh_step must be positive");
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> conditional_normal(
    const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
    const std::vector<int>& observed_idx, const Eigen::VectorXd& observed_vals) {
  const int p = static_cast<int>(mu.size());
  std::vector<char> is_obs(p, 0);
  for (const int i : observed_idx) is_obs[i] = 1;
  std::vector<int> mis;
  for (int i = 0; i < p; ++i)
    if (!is_obs[i]) mis.push_back(i);

  if (observed_idx.empty()) return {mu, sigma};
  const int no = static_cast<int>(observed_idx.size());
  const int nm = static_cast<int>(mis.size());
  if (nm == 0) return {Eigen::VectorXd(0), Eigen::MatrixXd(0, 0)};

  Eigen::MatrixXd s_oo(no, no), s_mo(nm, no), s_mm(nm, nm);
  for (int a = 0; a < no; ++a)
    for (int b = 0; b < no; ++b) s_oo(a, b) = sigma(observed_idx[a], observed_idx[b]);
  for (int a = 0; a < nm; ++a)
    for (int b = 0; b < no; ++b) s_mo(a, b) = sigma(mis[a], observed_idx[b]);
  for (int a = 0; a < nm; ++a)
    for (int b = 0; b < nm; ++b) s_mm(a, b) = sigma(mis[a], mis[b]);

  Eigen::LLT<Eigen::MatrixXd> llt(s_oo);
  if (llt.info() != Eigen::Success) {
    s_oo.diagonal().array() += 1e-8;
    llt.compute(s_oo);
    if (llt.info() != Eigen::Success)
      throw MethodError("conditional_normal", "observed block is singular");
  }
  const Eigen::MatrixXd k = llt.solve(s_mo.transpose()).transpose();  // nm x no

  Eigen::VectorXd diff(no);
  for (int a = 0; a < no; ++a) diff[a] = observed_vals[a] - mu[observed_idx[a]];
  Eigen::VectorXd mu_cond(nm);
  for (int a = 0; a < nm; ++a) mu_cond[a] = mu[mis[a]];
  mu_cond += k * diff;
  Eigen::MatrixXd sigma_cond = s_mm - k * s_mo.transpose();
  sigma_cond = 0.5 * (sigma_cond + sigma_cond.transpose());  // symmetrize
  return {mu_cond, sigma_cond};
}

namespace {

// log density of InverseWishart(nu, S) at X, up to an additive constant
double log_inv_wishart(const Eigen::MatrixXd& x, double nu, const Eigen::MatrixXd& s) {
  const int p = static_cast<int>(x.rows());
  const Eigen::LLT<Eigen::MatrixXd> llt(x);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  double logdet = 0.0;
  for (int i = 0; i < p; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  const double tr = llt.solve(s).trace();
  return -0.5 * (nu + p + 1.0) * logdet - 0.5 * tr;
}

// Sigma ~ IW(nu, scale): Bartlett draw of Sigma^-1 ~ Wishart(nu, scale^-1)
Eigen::MatrixXd inv_wishart_draw(double nu, const Eigen::MatrixXd& scale, Rng& rng,
                                 const std::string& label) {
  const int p = static_cast<int>(scale.rows());
  const Eigen::MatrixXd s = scale.inverse();
  const Eigen::MatrixXd l = chol_lower(0.5 * (s + s.transpose()), label);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < p; ++i) {
    a(i, i) = std::sqrt(rng.chi_squared(nu - i));
    for (int j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  const Eigen::MatrixXd la = l * a;
  const Eigen::MatrixXd w = la * la.transpose();  // Sigma^-1 draw
  Eigen::MatrixXd sigma = w.inverse();
  sigma = 0.5 * (sigma + sigma.transpose());
  return sigma;
}

struct LogCholParams {
  Eigen::VectorXd theta;  // log-diagonals first, then row-major off-diagonals
};

LogCholParams to_log_chol(const Eigen::MatrixXd& sigma, const std::string& label) {
  const Eigen::MatrixXd l = chol_lower(sigma, label);
  const int p = static_cast<int>(sigma.rows());
  LogCholParams out;
  out.theta.resize(p * (p + 1) / 2);
  int k = 0;
  for (int i = 0; i < p; ++i) out.theta[k++] = std::log(l(i, i));
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < i; ++j) out.theta[k++] = l(i, j);
  return out;
}

Eigen::MatrixXd from_log_chol(const Eigen::VectorXd& theta, int p) {
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(p, p);
  int k = 0;
  for (int i = 0; i < p; ++i) l(i, i) = std::exp(theta[k++]);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < i; ++j) l(i, j) = theta[k++];
  return l * l.transpose();
}

// log |Jacobian| of sigma = L L^T over the log-Cholesky parameters
double log_chol_jacobian(const Eigen::VectorXd& theta, int p) {
  double lj = p * std::log(2.0);
  for (int i = 0; i < p; ++i) lj += (p - i + 1.0) * theta[i];  // l_ii^(p-i+2) with log diag
  return lj;
}

double sigma_u_log_target(const Eigen::MatrixXd& sigma_u, const std::vector<Eigen::VectorXd>& u) {
  const int p = static_cast<int>(sigma_u.rows());
  const Eigen::LLT<Eigen::MatrixXd> llt(sigma_u);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  double logdet = 0.0;
  for (int i = 0; i < p; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  double quad = 0.0;
  for (const auto& uj : u) quad += uj.dot(llt.solve(uj));
  const double prior = log_inv_wishart(sigma_u, p + 2.0, Eigen::MatrixXd::Identity(p, p));
  return prior - 0.5 * static_cast<double>(u.size()) * logdet - 0.5 * quad;
}

}  // namespace

bool mh_update_sigma_u(JmState& state, const JmConfig& cfg, Rng& rng) {
  const int p = static_cast<int>(state.sigma_u.rows());
  const double scale =
      cfg.mh_step / std::sqrt(std::max<size_t>(state.u.size(), 1));

  const LogCholParams cur = to_log_chol(state.sigma_u, "mh_update_sigma_u");
  Eigen::VectorXd prop = cur.theta;
  for (int i = 0; i < prop.size(); ++i) prop[i] += scale * rng.normal();

  const Eigen::MatrixXd sigma_prop = from_log_chol(prop, p);
  const double log_num = sigma_u_log_target(sigma_prop, state.u) + log_chol_jacobian(prop, p);
  const double log_den =
      sigma_u_log_target(state.sigma_u, state.u) + log_chol_jacobian(cur.theta, p);

  const double log_u = std::log(std::max(rng.uniform(), 1e-300));
  if (log_u < log_num - log_den) {
    state.sigma_u = sigma_prop;
    return true;
  }
  return false;
}

namespace {

struct JmProblem {
  // responses (n x p) with NaN for missing, fixed-effect design X (n x q)
  Eigen::MatrixXd y;
  Eigen::MatrixXd x;
  std::vector<int> response_features;  // schema feature per y column
  std::vector<int> cluster_of;         // row -> cluster index
  int n_clusters = 0;
};

JmProblem build_problem(const LongitudinalDataset& d, const JmConfig& cfg) {
  JmProblem prob;
  const size_t n = d.n_records();
  const int target = d.schema.target_index();
  const auto tv = d.schema.time_varying_indices();
  const auto stat = d.schema.static_indices();

  std::vector<int> resp = tv;
  std::vector<int> covs;  // schema features used as covariates
  for (const int f : stat) covs.push_back(f);
  if (cfg.use_target) covs.push_back(target);

  if (cfg.level == JmLevel::Single) {
    // covariates join the joint normal as always-observed responses
    for (const int f : covs) resp.push_back(f);
    covs.clear();
  }

  const int p = static_cast<int>(resp.size());
  const int q = 2 + static_cast<int>(covs.size());  // intercept + time (+ covariates)

  prob.y.resize(n, p);
  prob.x.resize(n, q);
  prob.response_features = resp;
  prob.cluster_of.resize(n);

  const auto spans = d.patients();
  prob.n_clusters = static_cast<int>(spans.size());
  for (size_t c = 0; c < spans.size(); ++c)
    for (size_t i = spans[c].begin; i < spans[c].end; ++i)
      prob.cluster_of[i] = static_cast<int>(c);

  for (size_t i = 0; i < n; ++i) {
    const auto& vals = d.records[i].values;
    for (int j = 0; j < p; ++j) prob.y(i, j) = vals[resp[j]];
    int c = 0;
    prob.x(i, c++) = 1.0;
    prob.x(i, c++) = d.records[i].t_days / 365.25;
    for (const int f : covs) prob.x(i, c++) = vals[f];
  }
  return prob;
}

}  // namespace

std::vector<CompletedDataset> jm_impute(const LongitudinalDataset& d, const JmConfig& cfg,
                                        JmDiagnostics* diag) {
  cfg.validate();
  const std::string method = jm_level_name(cfg.level);
  d.validate(false);
  if (cfg.level == JmLevel::Clustered && d.n_patients() < 2)
    throw DataError("jm: clustered level needs at least 2 patients");

  JmProblem prob = build_problem(d, cfg);
  const int n = static_cast<int>(prob.y.rows());
  const int p = static_cast<int>(prob.y.cols());
  const int q = static_cast<int>(prob.x.cols());
  if (n < p + 2) throw DataError("jm: need at least p+2 rows");
  const bool clustered = cfg.level == JmLevel::Clustered;

  // fixed design pieces
  Eigen::MatrixXd xtx = prob.x.transpose() * prob.x;
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(xtx);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    if (!(lmin > 0.0) || lmax / lmin > 1e12)
      xtx.diagonal().array() += 1e-6 * xtx.trace() / q;
  }
  const Eigen::LLT<Eigen::MatrixXd> xtx_llt(xtx);
  const Eigen::MatrixXd xtx_inv = xtx_llt.solve(Eigen::MatrixXd::Identity(q, q));
  const Eigen::MatrixXd lx = chol_lower(xtx_inv, method);

  // missing patterns per row (missingness is fixed across iterations)
  std::vector<std::vector<int>> mis_of_row(n), obs_of_row(n);
  std::vector<uint32_t> pattern_of(n, 0);
  size_t n_missing = 0;
  for (int i = 0; i < n; ++i) {
    uint32_t key = 0;
    for (int j = 0; j < p; ++j) {
      if (is_missing(prob.y(i, j))) {
        mis_of_row[i].push_back(j);
        key |= (1u << j);
        ++n_missing;
      } else {
        obs_of_row[i].push_back(j);
      }
    }
    pattern_of[i] = key;
  }

  Rng rng(derive_seed(cfg.seed, method));

  // initial state: means/covariance from observed data, missing cells at the
  // column mean
  JmState state;
  state.y_complete = prob.y;
  Eigen::VectorXd col_mean = Eigen::VectorXd::Zero(p);
  for (int j = 0; j < p; ++j) {
    double s = 0.0;
    int c = 0;
    for (int i = 0; i < n; ++i)
      if (!is_missing(prob.y(i, j))) {
        s += prob.y(i, j);
        ++c;
      }
    if (c == 0) throw DataError("jm: column with no observed values");
    col_mean[j] = s / c;
    for (int i = 0; i < n; ++i)
      if (is_missing(state.y_complete(i, j))) state.y_complete(i, j) = col_mean[j];
  }
  state.beta = Eigen::MatrixXd::Zero(q, p);
  state.beta.row(0) = col_mean.transpose();
  state.sigma_e = Eigen::MatrixXd::Identity(p, p);
  state.sigma_u = Eigen::MatrixXd::Identity(p, p) * 0.1;
  if (clustered) state.u.assign(prob.n_clusters, Eigen::VectorXd::Zero(p));

  if (diag) {
    diag->trace_header = {"iteration", "accepted"};
    for (int j = 0; j < p; ++j) diag->trace_header.push_back("sigma_e_" + std::to_string(j));
    if (clustered)
      for (int j = 0; j < p; ++j) diag->trace_header.push_back("sigma_u_" + std::to_string(j));
  }

  std::vector<CompletedDataset> out;
  const long total_iters =
      static_cast<long>(cfg.n_burn) + static_cast<long>(cfg.n_between) * cfg.m;

  std::vector<std::pair<size_t, int>> imputed_cells;
  for (int i = 0; i < n; ++i)
    for (const int j : mis_of_row[i]) imputed_cells.emplace_back(i, prob.response_features[j]);
  std::sort(imputed_cells.begin(), imputed_cells.end());

  for (long iter = 1; iter <= total_iters; ++iter) {
    // 1. redraw missing coordinates row by row, factoring each pattern once
    if (n_missing > 0) {
      const Eigen::MatrixXd mu_all = prob.x * state.beta;  // n x p
      std::map<uint32_t, std::pair<Eigen::MatrixXd, Eigen::MatrixXd>> factors;  // K, chol(C)
      for (int i = 0; i < n; ++i) {
        if (mis_of_row[i].empty()) continue;
        const auto& mis = mis_of_row[i];
        const auto& obs = obs_of_row[i];
        auto it = factors.find(pattern_of[i]);
        if (it == factors.end()) {
          const int no = static_cast<int>(obs.size());
          const int nm = static_cast<int>(mis.size());
          Eigen::MatrixXd k(nm, no), lc;
          if (no == 0) {
            lc = chol_lower(state.sigma_e, method);
          } else {
            Eigen::MatrixXd s_oo(no, no), s_mo(nm, no), s_mm(nm, nm);
            for (int a = 0; a < no; ++a)
              for (int b = 0; b < no; ++b) s_oo(a, b) = state.sigma_e(obs[a], obs[b]);
            for (int a = 0; a < nm; ++a)
              for (int b = 0; b < no; ++b) s_mo(a, b) = state.sigma_e(mis[a], obs[b]);
            for (int a = 0; a < nm; ++a)
              for (int b = 0; b < nm; ++b) s_mm(a, b) = state.sigma_e(mis[a], mis[b]);
            Eigen::LLT<Eigen::MatrixXd> llt(s_oo);
            if (llt.info() != Eigen::Success) {
              s_oo.diagonal().array() += 1e-8;
              llt.compute(s_oo);
              if (llt.info() != Eigen::Success)
                throw MethodError(method, "conditional covariance not positive definite");
            }
            k = llt.solve(s_mo.transpose()).transpose();
            Eigen::MatrixXd c = s_mm - k * s_mo.transpose();
            c = 0.5 * (c + c.transpose());
            lc = chol_lower(c, method);
          }
          it = factors.emplace(pattern_of[i], std::make_pair(std::move(k), std::move(lc))).first;
        }
        const Eigen::MatrixXd& k = it->second.first;
        const Eigen::MatrixXd& lc = it->second.second;
        const int no = static_cast<int>(obs.size());
        const int nm = static_cast<int>(mis.size());

        Eigen::VectorXd mu_row = mu_all.row(i).transpose();
        if (clustered) mu_row += state.u[prob.cluster_of[i]];
        Eigen::VectorXd cond_mean(nm);
        for (int a = 0; a < nm; ++a) cond_mean[a] = mu_row[mis[a]];
        if (no > 0) {
          Eigen::VectorXd diff(no);
          for (int a = 0; a < no; ++a) diff[a] = state.y_complete(i, obs[a]) - mu_row[obs[a]];
          cond_mean += k * diff;
        }
        Eigen::VectorXd z(nm);
        for (int a = 0; a < nm; ++a) z[a] = rng.normal();
        const Eigen::VectorXd draw = cond_mean + lc * z;
        for (int a = 0; a < nm; ++a) state.y_complete(i, mis[a]) = draw[a];
      }
    }

    // 2. fixed effects: matrix-normal draw around the GLS mean
    {
      Eigen::MatrixXd resp = state.y_complete;
      if (clustered)
        for (int i = 0; i < n; ++i) resp.row(i) -= state.u[prob.cluster_of[i]].transpose();
      const Eigen::MatrixXd beta_hat = xtx_llt.solve(prob.x.transpose() * resp);
      const Eigen::MatrixXd lsig = chol_lower(state.sigma_e, method);
      Eigen::MatrixXd g(q, p);
      for (int a = 0; a < q; ++a)
        for (int b = 0; b < p; ++b) g(a, b) = rng.normal();
      state.beta = beta_hat + lx * g * lsig.transpose();
    }

    // 3. random intercepts
    if (clustered) {
      const Eigen::LLT<Eigen::MatrixXd> se_llt(state.sigma_e);
      const Eigen::MatrixXd se_inv = se_llt.solve(Eigen::MatrixXd::Identity(p, p));
      const Eigen::LLT<Eigen::MatrixXd> su_llt(state.sigma_u);
      const Eigen::MatrixXd su_inv = su_llt.solve(Eigen::MatrixXd::Identity(p, p));
      const Eigen::MatrixXd mu_all = prob.x * state.beta;

      std::vector<Eigen::VectorXd> rsum(prob.n_clusters, Eigen::VectorXd::Zero(p));
      std::vector<int> rcount(prob.n_clusters, 0);
      for (int i = 0; i < n; ++i) {
        rsum[prob.cluster_of[i]] +=
            (state.y_complete.row(i) - mu_all.row(i)).transpose();
        rcount[prob.cluster_of[i]] += 1;
      }
      for (int c = 0; c < prob.n_clusters; ++c) {
        Eigen::MatrixXd prec = rcount[c] * se_inv + su_inv;
        prec = 0.5 * (prec + prec.transpose());
        const Eigen::LLT<Eigen::MatrixXd> prec_llt(prec);
        const Eigen::MatrixXd cov = prec_llt.solve(Eigen::MatrixXd::Identity(p, p));
        const Eigen::VectorXd mean = prec_llt.solve(se_inv * rsum[c]);
        const Eigen::MatrixXd lcov = chol_lower(0.5 * (cov + cov.transpose()), method);
        Eigen::VectorXd z(p);
        for (int a = 0; a < p; ++a) z[a] = rng.normal();
        state.u[c] = mean + lcov * z;
      }
    }

    // 4. residual covariance: conjugate inverse-Wishart draw
    {
      const Eigen::MatrixXd mu_all = prob.x * state.beta;
      Eigen::MatrixXd e = Eigen::MatrixXd::Identity(p, p);  // prior scale
      for (int i = 0; i < n; ++i) {
        Eigen::VectorXd r = (state.y_complete.row(i) - mu_all.row(i)).transpose();
        if (clustered) r -= state.u[prob.cluster_of[i]];
        e.noalias() += r * r.transpose();
      }
      state.sigma_e = inv_wishart_draw(p + 2.0 + n, e, rng, method);
    }

    // 5. random-effect covariance via Metropolis-Hastings
    bool accepted = false;
    if (clustered) {
      accepted = mh_update_sigma_u(state, cfg, rng);
      if (diag) {
        diag->n_proposed += 1;
        if (accepted) diag->n_accepted += 1;
      }
    }

    if (state.y_complete.cwiseAbs().maxCoeff() > 1e6)
      throw MethodError(method, "divergent chain (|value| > 1e6)");

    if (diag) {
      std::vector<double> row{static_cast<double>(iter),
                              clustered ? (accepted ? 1.0 : 0.0) : -1.0};
      for (int j = 0; j < p; ++j) row.push_back(state.sigma_e(j, j));
      if (clustered)
        for (int j = 0; j < p; ++j) row.push_back(state.sigma_u(j, j));
      diag->trace.push_back(std::move(row));
    }

    if (iter > cfg.n_burn && (iter - cfg.n_burn) % cfg.n_between == 0 &&
        static_cast<int>(out.size()) < cfg.m) {
      CompletedDataset cd;
      cd.dataset = d;
      for (int i = 0; i < n; ++i)
        for (const int j : mis_of_row[i])
          cd.dataset.records[i].values[prob.response_features[j]] = state.y_complete(i, j);
      cd.provenance = {method, static_cast<int>(out.size()), cfg.seed};
      cd.imputed_cells = imputed_cells;
      out.push_back(std::move(cd));
      if (diag) {
        diag->emitted_sigma_e.push_back(state.sigma_e);
        if (clustered) diag->emitted_sigma_u.push_back(state.sigma_u);
      }
    }
  }
  return out;
}

}  // namespace mslong
