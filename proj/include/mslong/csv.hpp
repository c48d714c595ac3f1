#pragma once

#include <iosfwd>
#include <string>

#include "mslong/dataset.hpp"

namespace mslong {

// CSV layout: patient_id,t_days,<schema feature names...>; missing cells are
// empty or "NA". The age column may instead be named "age_baseline", in which
// case age-at-visit (baseline + t_days/365.25) is computed at load.
LongitudinalDataset load_csv(std::istream& in, const FeatureSchema& schema);
LongitudinalDataset load_csv_file(const std::string& path, const FeatureSchema& schema);

// Doubles are written with the shortest round-trip representation, so
// load_csv(write_csv(d)) reproduces every value bit-exactly.
void write_csv(std::ostream& out, const LongitudinalDataset& d);
void write_csv_file(const std::string& path, const LongitudinalDataset& d);

// Shortest round-trip decimal form of v (also used by report writers).
std::string format_double(double v);

}  // namespace mslong
