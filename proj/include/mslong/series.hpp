#pragma once

#include <span>
#include <string>
#include <vector>

#include "mslong/dataset.hpp"

namespace mslong {

// One patient x one feature, times strictly increasing.
struct SeriesView {
  std::span<const int> times;
  std::span<const double> values;  // NaN = missing
};

struct EwmaOptions {
  int k = 4;                 // window half-width in index positions
  bool day_weights = false;  // weight by exp(-lambda * |dt|) instead of 1/2^d
  double day_lambda = 0.02;
};

// Interior gaps by linear interpolation in t_days; leading/trailing gaps are
// constant-extended from the nearest observed value.
std::vector<double> impute_linear(const SeriesView& s);

// Natural cubic spline through the observed points (>= 4 of them), linear
// with 2-3, constant with 1. Evaluation outside the observed time range is
// clamped to the boundary observed value.
std::vector<double> impute_spline(const SeriesView& s);

// Last observation carried forward; leading gaps take the first following
// observed value.
std::vector<double> impute_locf(const SeriesView& s);

// Distance-decaying weighted mean of observed values within k index positions
// on each side (weight 1/2^d); the window expands if it holds no observation.
std::vector<double> impute_ewma(const SeriesView& s, const EwmaOptions& opts = {});

enum class SingleMethod { Linear, Spline, Locf, Ewma };

// Applies one single-imputation method to every patient x time-varying
// feature series of the dataset. Errors name the patient/feature that has no
// observed value at all.
LongitudinalDataset impute_dataset_single(const LongitudinalDataset& d, SingleMethod method,
                                          const EwmaOptions& ewma = {});

}  // namespace mslong
