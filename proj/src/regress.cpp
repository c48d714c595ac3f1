#include "mslong/regress.hpp"

namespace mslong {

OlsFit ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  OlsFit fit;
  fit.n = static_cast<int>(X.rows());
  fit.p = static_cast<int>(X.cols());
  if (fit.n <= fit.p)
    throw DataError("ols_fit: need more rows (" + std::to_string(fit.n) + ") than columns (" +
                    std::to_string(fit.p) + ")");

  Eigen::MatrixXd xtx = X.transpose() * X;
  const Eigen::VectorXd xty = X.transpose() * y;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(xtx);
  const double lmax = es.eigenvalues().maxCoeff();
  const double lmin = es.eigenvalues().minCoeff();
  if (!(lmin > 0.0) || lmax / lmin > 1e12) {
    fit.ridged = true;
    xtx.diagonal().array() += 1e-6 * xtx.trace() / static_cast<double>(fit.p);
  }

  const Eigen::LLT<Eigen::MatrixXd> llt(xtx);
  if (llt.info() != Eigen::Success)
    throw DataError("ols_fit: normal equations not positive definite after ridge fallback");
  fit.beta = llt.solve(xty);
  fit.xtx_inv = llt.solve(Eigen::MatrixXd::Identity(fit.p, fit.p));

  const Eigen::VectorXd resid = y - X * fit.beta;
  fit.rss = resid.squaredNorm();
  fit.sigma2_hat = std::max(0.0, fit.rss / static_cast<double>(fit.n - fit.p));
  return fit;
}

Eigen::VectorXd bayes_coef_draw(const OlsFit& fit, Rng& rng, double* sigma2_out) {
  const double chi2 = rng.chi_squared(static_cast<double>(fit.n - fit.p));
  const double sigma2 = fit.rss / std::max(chi2, 1e-300);
  if (sigma2_out) *sigma2_out = sigma2;

  const Eigen::MatrixXd L = chol_lower(fit.xtx_inv, "bayes_coef_draw");
  Eigen::VectorXd z(fit.p);
  for (int i = 0; i < fit.p; ++i) z[i] = rng.normal();
  return fit.beta + std::sqrt(sigma2) * (L * z);
}

Eigen::MatrixXd chol_lower(const Eigen::MatrixXd& a, const std::string& label) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::MatrixXd jittered = a;
  jittered.diagonal().array() += 1e-8;
  llt.compute(jittered);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  throw MethodError(label, "covariance not positive definite (jitter 1e-8 failed)");
}

}  // namespace mslong
