#include "mslong/csv.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace mslong {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_cell(const std::string& s, size_t row, const std::string& col) {
  if (s.empty() || s == "NA") return missing_value();
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw DataError("row " + std::to_string(row) + ": malformed value '" + s + "' in column '" +
                    col + "'");
  return v;
}

int parse_int_cell(const std::string& s, size_t row, const std::string& col) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw DataError("row " + std::to_string(row) + ": malformed value '" + s + "' in column '" +
                    col + "'");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

LongitudinalDataset load_csv(std::istream& in, const FeatureSchema& schema) {
  schema.validate();
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty input");

  const std::vector<std::string> header = split_line(line);
  const size_t p = schema.size();
  if (header.size() != p + 2 || header[0] != "patient_id" || header[1] != "t_days")
    throw DataError("header must be patient_id,t_days,<feature names>");
  int age_baseline_col = -1;
  for (size_t f = 0; f < p; ++f) {
    const std::string& want = schema.at(f).name;
    const std::string& got = header[f + 2];
    if (got == want) continue;
    if (want == "age" && got == "age_baseline") {
      age_baseline_col = static_cast<int>(f);
      continue;
    }
    throw DataError("header column " + std::to_string(f + 2) + " is '" + got + "', expected '" +
                    want + "'");
  }

  LongitudinalDataset d;
  d.schema = schema;
  size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != p + 2)
      throw DataError("row " + std::to_string(row) + ": expected " + std::to_string(p + 2) +
                      " fields, got " + std::to_string(cells.size()));
    VisitRecord r;
    r.patient_id = cells[0];
    r.t_days = parse_int_cell(cells[1], row, "t_days");
    r.values.resize(p);
    for (size_t f = 0; f < p; ++f) r.values[f] = parse_cell(cells[f + 2], row, header[f + 2]);
    if (age_baseline_col >= 0 && !is_missing(r.values[age_baseline_col]))
      r.values[age_baseline_col] += r.t_days / 365.25;

    // row-level cell checks so errors carry the offending row index
    for (size_t f = 0; f < p; ++f) {
      const Feature& feat = schema.at(f);
      const double v = r.values[f];
      if (is_missing(v)) {
        if (feat.kind == FeatureKind::Target)
          throw DataError("row " + std::to_string(row) + ": target missing");
        if (feat.kind == FeatureKind::Static)
          throw DataError("row " + std::to_string(row) + ": static feature '" + feat.name +
                          "' missing");
      } else if (!feat.domain.contains(v)) {
        throw DataError("row " + std::to_string(row) + ": '" + feat.name + "' value " + cells[f + 2] +
                        " out of domain [" + format_double(feat.domain.lo) + ", " +
                        format_double(feat.domain.hi) + "]");
      }
    }
    d.records.push_back(std::move(r));
  }

  // group rows per patient in first-appearance order, sorted by t_days
  std::vector<std::string> order;
  std::map<std::string, std::vector<VisitRecord>> by_patient;
  for (auto& r : d.records) {
    auto it = by_patient.find(r.patient_id);
    if (it == by_patient.end()) {
      order.push_back(r.patient_id);
      it = by_patient.emplace(r.patient_id, std::vector<VisitRecord>{}).first;
    }
    it->second.push_back(std::move(r));
  }
  d.records.clear();
  for (const auto& pid : order) {
    auto& rs = by_patient[pid];
    std::stable_sort(rs.begin(), rs.end(),
                     [](const VisitRecord& a, const VisitRecord& b) { return a.t_days < b.t_days; });
    for (auto& r : rs) d.records.push_back(std::move(r));
  }

  d.validate();
  return d;
}

LongitudinalDataset load_csv_file(const std::string& path, const FeatureSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return load_csv(in, schema);
}

void write_csv(std::ostream& out, const LongitudinalDataset& d) {
  out << "patient_id,t_days";
  for (const auto& f : d.schema.features) out << ',' << f.name;
  out << '\n';
  for (const auto& r : d.records) {
    out << r.patient_id << ',' << r.t_days;
    for (const double v : r.values) {
      out << ',';
      if (!is_missing(v)) out << format_double(v);
    }
    out << '\n';
  }
}

void write_csv_file(const std::string& path, const LongitudinalDataset& d) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  write_csv(out, d);
  if (!out) throw DataError("write failed for '" + path + "'");
}

}  // namespace mslong
