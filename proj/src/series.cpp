#include "mslong/series.hpp"

#include <algorithm>
#include <cmath>

namespace mslong {

namespace {

std::vector<size_t> observed_indices(const SeriesView& s) {
  std::vector<size_t> obs;
  for (size_t i = 0; i < s.values.size(); ++i)
    if (!is_missing(s.values[i])) obs.push_back(i);
  if (obs.empty()) throw DataError("series has no observed values");
  return obs;
}

}  // namespace

std::vector<double> impute_linear(const SeriesView& s) {
  const auto obs = observed_indices(s);
  std::vector<double> out(s.values.begin(), s.values.end());
  size_t seg = 0;  // obs[seg] is the last observed index at or before i
  for (size_t i = 0; i < out.size(); ++i) {
    if (!is_missing(out[i])) continue;
    while (seg + 1 < obs.size() && obs[seg + 1] < i) ++seg;
    if (i < obs.front()) {
      out[i] = s.values[obs.front()];
    } else if (i > obs.back()) {
      out[i] = s.values[obs.back()];
    } else {
      const size_t a = obs[seg], b = obs[seg + 1];
      const double t = static_cast<double>(s.times[i] - s.times[a]) /
                       static_cast<double>(s.times[b] - s.times[a]);
      out[i] = s.values[a] + t * (s.values[b] - s.values[a]);
    }
  }
  return out;
}

std::vector<double> impute_spline(const SeriesView& s) {
  const auto obs = observed_indices(s);
  const size_t m = obs.size();
  if (m < 4) return impute_linear(s);  // 1 point: constant via linear's extension

  // natural cubic spline: tridiagonal solve for second derivatives
  std::vector<double> x(m), y(m);
  for (size_t j = 0; j < m; ++j) {
    x[j] = static_cast<double>(s.times[obs[j]]);
    y[j] = s.values[obs[j]];
  }
  std::vector<double> h(m - 1);
  for (size_t j = 0; j + 1 < m; ++j) h[j] = x[j + 1] - x[j];

  std::vector<double> diag(m, 2.0), rhs(m, 0.0), sub(m, 0.0), sup(m, 0.0), m2(m, 0.0);
  for (size_t j = 1; j + 1 < m; ++j) {
    sub[j] = h[j - 1] / (h[j - 1] + h[j]);
    sup[j] = h[j] / (h[j - 1] + h[j]);
    rhs[j] = 6.0 * ((y[j + 1] - y[j]) / h[j] - (y[j] - y[j - 1]) / h[j - 1]) / (h[j - 1] + h[j]);
  }
  // natural boundary: m2[0] = m2[m-1] = 0; Thomas algorithm on rows 1..m-2
  for (size_t j = 2; j + 1 < m; ++j) {
    const double w = sub[j] / diag[j - 1];
    diag[j] -= w * sup[j - 1];
    rhs[j] -= w * rhs[j - 1];
  }
  for (size_t j = m - 2; j >= 1; --j) {
    m2[j] = (rhs[j] - sup[j] * (j + 2 < m ? m2[j + 1] : 0.0)) / diag[j];
    if (j == 1) break;
  }

  std::vector<double> out(s.values.begin(), s.values.end());
  for (size_t i = 0; i < out.size(); ++i) {
    if (!is_missing(out[i])) continue;
    const double t = static_cast<double>(s.times[i]);
    if (t <= x.front()) {
      out[i] = y.front();
      continue;
    }
    if (t >= x.back()) {
      out[i] = y.back();
      continue;
    }
    size_t j = 0;
    while (j + 2 < m && x[j + 1] < t) ++j;
    const double dx = x[j + 1] - x[j];
    const double a = (x[j + 1] - t) / dx;
    const double b = (t - x[j]) / dx;
    out[i] = a * y[j] + b * y[j + 1] +
             ((a * a * a - a) * m2[j] + (b * b * b - b) * m2[j + 1]) * dx * dx / 6.0;
  }
  return out;
}

std::vector<double> impute_locf(const SeriesView& s) {
  const auto obs = observed_indices(s);
  std::vector<double> out(s.values.begin(), s.values.end());
  double last = s.values[obs.front()];  // NOCB fallback for leading gaps
  for (size_t i = 0; i < out.size(); ++i) {
    if (is_missing(out[i]))
      out[i] = last;
    else
      last = out[i];
  }
  return out;
}

std::vector<double> impute_ewma(const SeriesView& s, const EwmaOptions& opts) {
  if (opts.k < 1) throw DataError("impute_ewma: k must be >= 1");
  const auto obs = observed_indices(s);
  (void)obs;
  const size_t n = s.values.size();
  std::vector<double> out(s.values.begin(), s.values.end());
  for (size_t i = 0; i < n; ++i) {
    if (!is_missing(out[i])) continue;
    for (size_t w = static_cast<size_t>(opts.k);; ++w) {
      double num = 0.0, den = 0.0;
      const size_t lo = (i >= w) ? i - w : 0;
      const size_t hi = std::min(n - 1, i + w);
      for (size_t j = lo; j <= hi; ++j) {
        if (j == i || is_missing(s.values[j])) continue;
        const double weight =
            opts.day_weights
                ? std::exp(-opts.day_lambda * std::abs(double(s.times[i]) - double(s.times[j])))
                : std::pow(0.5, double(i > j ? i - j : j - i));
        num += weight * s.values[j];
        den += weight;
      }
      if (den > 0.0) {
        out[i] = num / den;
        break;
      }
    }
  }
  return out;
}

LongitudinalDataset impute_dataset_single(const LongitudinalDataset& d, SingleMethod method,
                                          const EwmaOptions& ewma) {
  LongitudinalDataset out = d;
  const auto spans = d.patients();
  for (const int f : d.schema.time_varying_indices()) {
    for (const auto& sp : spans) {
      const size_t n = sp.count();
      std::vector<int> times(n);
      std::vector<double> vals(n);
      bool any_missing = false;
      for (size_t i = 0; i < n; ++i) {
        times[i] = d.records[sp.begin + i].t_days;
        vals[i] = d.records[sp.begin + i].values[f];
        any_missing = any_missing || is_missing(vals[i]);
      }
      if (!any_missing) continue;
      const SeriesView view{times, vals};
      std::vector<double> filled;
      try {
        switch (method) {
          case SingleMethod::Linear: filled = impute_linear(view); break;
          case SingleMethod::Spline: filled = impute_spline(view); break;
          case SingleMethod::Locf: filled = impute_locf(view); break;
          case SingleMethod::Ewma: filled = impute_ewma(view, ewma); break;
        }
      } catch (const DataError& e) {
        throw DataError(std::string(e.what()) + " (patient '" + sp.patient_id + "', feature '" +
                        d.schema.at(f).name + "')");
      }
      for (size_t i = 0; i < n; ++i) out.records[sp.begin + i].values[f] = filled[i];
    }
  }
  return out;
}

}  // namespace mslong
