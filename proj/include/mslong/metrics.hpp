#pragma once

#include <cmath>
#include <vector>

#include "mslong/errors.hpp"

namespace mslong {

struct PairedValues {
  std::vector<double> actual;
  std::vector<double> predicted;
};

inline double rmse(const PairedValues& p) {
  if (p.actual.empty()) throw DataError("rmse: empty input");
  if (p.actual.size() != p.predicted.size())
    throw DataError("rmse: length mismatch");
  double ss = 0.0;
  for (size_t i = 0; i < p.actual.size(); ++i) {
    const double d = p.actual[i] - p.predicted[i];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(p.actual.size()));
}

inline double r2(const PairedValues& p) {
  const size_t n = p.actual.size();
  if (n < 2) throw DataError("r2: need at least 2 points");
  if (n != p.predicted.size()) throw DataError("r2: length mismatch");
  double mean = 0.0;
  for (const double v : p.actual) mean += v;
  mean /= static_cast<double>(n);
  double ssr = 0.0, sst = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double r = p.actual[i] - p.predicted[i];
    const double t = p.actual[i] - mean;
    ssr += r * r;
    sst += t * t;
  }
  if (sst == 0.0) throw DataError("r2: undefined, actual values are all equal");
  return 1.0 - ssr / sst;
}

}  // namespace mslong
