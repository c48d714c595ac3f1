#pragma once

#include <Eigen/Dense>

#include "mslong/errors.hpp"
#include "mslong/rng.hpp"

namespace mslong {

struct OlsFit {
  Eigen::VectorXd beta;      // least-squares coefficients
  Eigen::MatrixXd xtx_inv;   // (X'X)^-1 (ridged if the system was singular)
  double sigma2_hat = 0.0;   // residual variance, RSS / (n - p) (floored at 0)
  double rss = 0.0;
  int n = 0;
  int p = 0;
  bool ridged = false;
};

// Ordinary least squares via the normal equations. If cond(X'X) exceeds
// 1e12 the system is re-solved with ridge term lambda = 1e-6 * trace(X'X)/p.
OlsFit ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

// One draw from the standard noninformative posterior:
// sigma2 ~ RSS / chi2_{n-p}, beta ~ N(beta_hat, sigma2 * (X'X)^-1).
Eigen::VectorXd bayes_coef_draw(const OlsFit& fit, Rng& rng, double* sigma2_out);

// Lower Cholesky factor with escalating jitter; throws MethodError(label)
// if the matrix cannot be factored even at jitter 1e-8 * I.
Eigen::MatrixXd chol_lower(const Eigen::MatrixXd& a, const std::string& label);

}  // namespace mslong
