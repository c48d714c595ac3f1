#include "mslong/svr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <unordered_map>

#include "mslong/errors.hpp"

namespace mslong {

namespace {

// LRU cache of kernel columns, stored as float (tol is 1e-3; single precision
// kernel values are far below it and halve the memory footprint)
class KernelCache {
 public:
  KernelCache(const DataMatrix& X, double gamma, size_t budget_bytes)
      : x_(X), gamma_(gamma) {
    max_cols_ = std::max<size_t>(2, budget_bytes / (sizeof(float) * std::max(1, X.n)));
    sq_norm_.resize(X.n);
    for (int r = 0; r < X.n; ++r) {
      double s = 0.0;
      for (int c = 0; c < X.p; ++c) s += X.at(r, c) * X.at(r, c);
      sq_norm_[r] = s;
    }
  }

  const std::vector<float>& column(int i) {
    auto it = map_.find(i);
    if (it != map_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second.order);
      return it->second.values;
    }
    if (map_.size() >= max_cols_) {
      const int victim = lru_.back();
      lru_.pop_back();
      map_.erase(victim);
    }
    lru_.push_front(i);
    Entry e;
    e.order = lru_.begin();
    e.values.resize(x_.n);
    // ||a-b||^2 = ||a||^2 + ||b||^2 - 2<a,b>, column-major dot accumulation
    std::vector<double> dot(x_.n, 0.0);
    for (int c = 0; c < x_.p; ++c) {
      const double xc = x_.at(i, c);
      const double* col = x_.col(c);
      for (int r = 0; r < x_.n; ++r) dot[r] += col[r] * xc;
    }
    const double ni = sq_norm_[i];
    for (int r = 0; r < x_.n; ++r) {
      const double d2 = std::max(0.0, sq_norm_[r] + ni - 2.0 * dot[r]);
      e.values[r] = std::exp(static_cast<float>(-gamma_ * d2));
    }
    return map_.emplace(i, std::move(e)).first->second.values;
  }

 private:
  struct Entry {
    std::vector<float> values;
    std::list<int>::iterator order;
  };
  const DataMatrix& x_;
  double gamma_;
  size_t max_cols_;
  std::vector<double> sq_norm_;
  std::unordered_map<int, Entry> map_;
  std::list<int> lru_;
};

struct PairChoice {
  int i = -1, j = -1;
  double up = 0.0, down = 0.0;
};

}  // namespace

void SvrModel::fit(const DataMatrix& X, const std::vector<double>& y, const SvrConfig& cfg) {
  if (!(cfg.C > 0.0)) throw DataError("svr: C must be positive");
  if (cfg.epsilon < 0.0) throw DataError("svr: epsilon must be >= 0");
  if (!(cfg.gamma > 0.0)) throw DataError("svr: gamma must be positive");
  const int n = X.n;
  if (n < 1) throw DataError("svr: empty training set");

  gamma_ = cfg.gamma;
  beta_.assign(n, 0.0);
  std::vector<double> f(n, 0.0);  // sum_j beta_j K_ij
  KernelCache cache(X, cfg.gamma, cfg.cache_mb << 20);

  const double C = cfg.C, eps = cfg.epsilon;

  // KKT bounds on the equality multiplier b per point, with F_i = y_i - f_i:
  //   i can push beta up   (beta_i < C):  requires b >= F_i -+ eps
  //   i can push beta down (beta_i > -C): requires b <= F_i +- eps
  // where the eps sign follows sign(beta_i). Optimal iff max(up) <= min(down)
  // within tol; otherwise (argmax up, argmin down) is the working pair.
  auto scan = [&]() {
    PairChoice pc;
    pc.up = -std::numeric_limits<double>::infinity();
    pc.down = std::numeric_limits<double>::infinity();
    for (int r = 0; r < n; ++r) {
      const double fr = y[r] - f[r];
      const double b = beta_[r];
      if (b < C) {
        const double up = (b >= 0.0) ? fr - eps : fr + eps;
        if (up > pc.up) {
          pc.up = up;
          pc.i = r;
        }
      }
      if (b > -C) {
        const double down = (b <= 0.0) ? fr + eps : fr - eps;
        if (down < pc.down) {
          pc.down = down;
          pc.j = r;
        }
      }
    }
    return pc;
  };

  converged_ = false;
  iterations_ = 0;
  PairChoice pc = scan();
  while (true) {
    if (pc.i < 0 || pc.j < 0 || pc.up - pc.down <= cfg.tol) {
      converged_ = true;
      break;
    }
    if (iterations_ >= cfg.max_passes) break;
    const int i = pc.i, j = pc.j;

    const std::vector<float>& ki = cache.column(i);
    const std::vector<float>& kj = cache.column(j);
    const double eta = double(ki[i]) + double(kj[j]) - 2.0 * double(ki[j]);
    const double dF = (y[i] - f[i]) - (y[j] - f[j]);
    const double t_max = std::min(C - beta_[i], beta_[j] + C);

    // phi(t) = eta/2 t^2 - dF t + eps(|bi+t| - |bi|) + eps(|bj-t| - |bj|)
    auto phi = [&](double t) {
      return 0.5 * eta * t * t - dF * t + eps * (std::abs(beta_[i] + t) - std::abs(beta_[i])) +
             eps * (std::abs(beta_[j] - t) - std::abs(beta_[j]));
    };

    // candidate steps: kink points, per-segment optima, and the cap
    std::vector<double> cand{t_max};
    if (beta_[i] < 0.0 && -beta_[i] < t_max) cand.push_back(-beta_[i]);
    if (beta_[j] > 0.0 && beta_[j] < t_max) cand.push_back(beta_[j]);
    if (eta > 0.0) {
      std::vector<double> bounds{0.0, t_max};
      if (beta_[i] < 0.0 && -beta_[i] < t_max) bounds.push_back(-beta_[i]);
      if (beta_[j] > 0.0 && beta_[j] < t_max) bounds.push_back(beta_[j]);
      std::sort(bounds.begin(), bounds.end());
      for (size_t s = 0; s + 1 < bounds.size(); ++s) {
        const double mid = 0.5 * (bounds[s] + bounds[s + 1]);
        const double si = (beta_[i] + mid >= 0.0) ? 1.0 : -1.0;
        const double sj = (beta_[j] - mid >= 0.0) ? 1.0 : -1.0;
        const double t_star = (dF - eps * si + eps * sj) / eta;
        cand.push_back(std::clamp(t_star, bounds[s], bounds[s + 1]));
      }
    }
    std::sort(cand.begin(), cand.end());
    double t_best = 0.0;
    double phi_best = 0.0;  // progress requires phi < 0; ties keep the smaller t
    for (const double t : cand) {
      if (t <= 0.0) continue;
      const double v = phi(t);
      if (v < phi_best) {
        phi_best = v;
        t_best = t;
      }
    }
    if (t_best <= 0.0) break;  // numerically stuck pair

    beta_[i] += t_best;
    beta_[j] -= t_best;
    ++iterations_;

    // fused pass: apply the update to f and select the next working pair
    PairChoice next;
    next.up = -std::numeric_limits<double>::infinity();
    next.down = std::numeric_limits<double>::infinity();
    const float* pki = ki.data();
    const float* pkj = kj.data();
    for (int r = 0; r < n; ++r) {
      f[r] += t_best * (double(pki[r]) - double(pkj[r]));
      const double fr = y[r] - f[r];
      const double b = beta_[r];
      if (b < C) {
        const double up = (b >= 0.0) ? fr - eps : fr + eps;
        if (up > next.up) {
          next.up = up;
          next.i = r;
        }
      }
      if (b > -C) {
        const double down = (b <= 0.0) ? fr + eps : fr - eps;
        if (down < next.down) {
          next.down = down;
          next.j = r;
        }
      }
    }
    pc = next;
  }
  if (!converged_) pc = scan();
  b_ = 0.5 * (pc.up + pc.down);

  // keep only support vectors for prediction
  int n_sv = 0;
  for (const double b : beta_)
    if (b != 0.0) ++n_sv;
  train_.resize(n_sv, X.p);
  sv_beta_.clear();
  sv_beta_.reserve(n_sv);
  int k = 0;
  for (int r = 0; r < n; ++r) {
    if (beta_[r] == 0.0) continue;
    for (int c = 0; c < X.p; ++c) train_.at(k, c) = X.at(r, c);
    sv_beta_.push_back(beta_[r]);
    ++k;
  }
}

double SvrModel::predict_row(const double* x) const {
  double s = b_;
  for (int r = 0; r < train_.n; ++r) {
    double d2 = 0.0;
    for (int c = 0; c < train_.p; ++c) {
      const double d = x[c] - train_.at(r, c);
      d2 += d * d;
    }
    s += sv_beta_[r] * std::exp(-gamma_ * d2);
  }
  return s;
}

}  // namespace mslong
