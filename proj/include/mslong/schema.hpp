#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mslong/errors.hpp"

namespace mslong {

enum class FeatureKind { Static, TimeVarying, Target };

// Value domain of a feature. Ordinal carries a grid step but range checks are
// range-only: imputed datasets legitimately hold off-grid reals until the
// caller opts into snapping (--round-to-domain).
struct Domain {
  enum class Tag { Binary, Ordinal, Continuous };
  Tag tag = Tag::Continuous;
  double lo = 0.0;
  double hi = 0.0;
  double step = 0.0;  // Ordinal only

  static Domain binary() { return {Tag::Binary, 0.0, 1.0, 1.0}; }
  static Domain ordinal(double lo, double hi, double step) { return {Tag::Ordinal, lo, hi, step}; }
  static Domain continuous(double lo, double hi) { return {Tag::Continuous, lo, hi, 0.0}; }

  bool contains(double v) const {
    if (std::isnan(v)) return false;
    if (tag == Tag::Binary) return v == 0.0 || v == 1.0;
    return v >= lo && v <= hi;
  }

  // Nearest valid value: clamp to range, then snap to the grid for
  // binary/ordinal domains.
  double snap(double v) const {
    double c = std::min(std::max(v, lo), hi);
    if (tag == Tag::Continuous) return c;
    const double s = (tag == Tag::Binary) ? 1.0 : step;
    return lo + s * std::round((c - lo) / s);
  }
};

struct Feature {
  std::string name;
  FeatureKind kind = FeatureKind::TimeVarying;
  Domain domain;
};

struct FeatureSchema {
  std::vector<Feature> features;

  size_t size() const { return features.size(); }
  const Feature& at(size_t i) const { return features[i]; }

  int index_of(const std::string& name) const {
    for (size_t i = 0; i < features.size(); ++i)
      if (features[i].name == name) return static_cast<int>(i);
    return -1;
  }

  int target_index() const {
    for (size_t i = 0; i < features.size(); ++i)
      if (features[i].kind == FeatureKind::Target) return static_cast<int>(i);
    return -1;
  }

  std::vector<int> indices_of(FeatureKind kind) const {
    std::vector<int> out;
    for (size_t i = 0; i < features.size(); ++i)
      if (features[i].kind == kind) out.push_back(static_cast<int>(i));
    return out;
  }

  std::vector<int> static_indices() const { return indices_of(FeatureKind::Static); }
  std::vector<int> time_varying_indices() const { return indices_of(FeatureKind::TimeVarying); }

  void validate() const {
    int n_target = 0;
    for (size_t i = 0; i < features.size(); ++i) {
      const Feature& f = features[i];
      if (f.name.empty()) throw DataError("schema: empty feature name");
      for (size_t j = i + 1; j < features.size(); ++j)
        if (features[j].name == f.name)
          throw DataError("schema: duplicate feature name '" + f.name + "'");
      if (f.kind == FeatureKind::Target) {
        ++n_target;
        if (f.domain.tag != Domain::Tag::Ordinal || f.domain.lo != 0.0 ||
            f.domain.hi != 10.0 || f.domain.step != 0.5)
          throw DataError("schema: target '" + f.name + "' must be ordinal(0, 10, 0.5)");
      }
    }
    if (n_target != 1) throw DataError("schema: exactly one target feature required");
  }

  // Table 1 layout: 3 statics, 7 FS sub-scores 0-6, deambulation 0-12, EDSS.
  static FeatureSchema default_schema() {
    FeatureSchema s;
    s.features = {
        {"sex", FeatureKind::Static, Domain::binary()},
        {"age", FeatureKind::Static, Domain::continuous(0.0, 100.0)},
        {"pediatric_onset", FeatureKind::Static, Domain::binary()},
        {"pyramidal", FeatureKind::TimeVarying, Domain::ordinal(0, 6, 1)},
        {"cerebellar", FeatureKind::TimeVarying, Domain::ordinal(0, 6, 1)},
        {"brainstem", FeatureKind::TimeVarying, Domain::ordinal(0, 6, 1)},
        {"sensory", FeatureKind::TimeVarying, Domain::ordinal(0, 6, 1)},
        {"sphincteric", FeatureKind::TimeVarying, Domain::ordinal(0, 6, 1)},
        {"visual", FeatureKind::TimeVarying, Domain::ordinal(0, 6, 1)},
        {"mental", FeatureKind::TimeVarying, Domain::ordinal(0, 6, 1)},
        {"deambulation", FeatureKind::TimeVarying, Domain::ordinal(0, 12, 1)},
        {"edss", FeatureKind::Target, Domain::ordinal(0, 10, 0.5)},
    };
    return s;
  }
};

}  // namespace mslong
