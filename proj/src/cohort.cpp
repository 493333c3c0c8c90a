#include "centile/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "centile/errors.hpp"

namespace centile {

std::size_t Cohort::measurement_count() const {
  std::size_t n = 0;
  for (const auto& [id, visits] : subjects) n += visits.size();
  return n;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_double(const std::string& text) {
  std::size_t b = text.find_first_not_of(" \t");
  std::size_t e = text.find_last_not_of(" \t");
  if (b == std::string::npos) return std::nullopt;
  const char* first = text.data() + b;
  const char* last = text.data() + e + 1;
  if (*first == '+') ++first;
  double v = 0.0;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

// Returns the skip reason, or an empty string when the measurement is valid.
std::string parse_row(const std::vector<std::string>& f, Measurement& m) {
  if (f.size() != 5) return "expected 5 fields, found " + std::to_string(f.size());
  m.subject_id = trim(f[0]);
  m.stratum = trim(f[1]);
  if (m.subject_id.empty()) return "missing subject_id";
  auto age = parse_double(f[2]);
  if (!age) return "non-numeric age_years";
  if (*age < 0.0) return "negative age";
  m.age = *age;
  if (!trim(f[3]).empty()) {
    auto w = parse_double(f[3]);
    if (!w) return "non-numeric weight_kg";
    if (*w <= 0.0) return "nonpositive weight";
    m.weight = *w;
  }
  if (!trim(f[4]).empty()) {
    auto h = parse_double(f[4]);
    if (!h) return "non-numeric height_cm";
    if (*h <= 0.0) return "nonpositive height";
    m.height = *h;
  }
  if (!m.weight && !m.height) return "neither weight nor height present";
  return {};
}

}  // namespace

void add_measurement(Cohort& cohort, Measurement m) {
  auto& visits = cohort.subjects[m.subject_id];
  if (!visits.empty() && visits.front().stratum != m.stratum) {
    throw ValidationError("stratum mismatch for subject " + m.subject_id);
  }
  auto pos = std::lower_bound(visits.begin(), visits.end(), m.age,
                              [](const Measurement& a, double age) { return a.age < age; });
  if (pos != visits.end() && pos->age == m.age) {
    throw ValidationError("duplicate visit");
  }
  cohort.strata.insert(m.stratum);
  visits.insert(pos, std::move(m));
}

LoadedCohort load_cohort(std::istream& in) {
  LoadedCohort out;
  std::string line;
  if (!std::getline(in, line)) {
    throw ValidationError("cohort CSV: missing header");
  }
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  auto header = split_csv_line(line);
  for (auto& h : header) h = trim(h);
  const std::vector<std::string> expected = {"subject_id", "stratum", "age_years", "weight_kg",
                                             "height_cm"};
  if (header != expected) {
    throw ValidationError(std::string("cohort CSV: malformed header, expected '") +
                          kCohortHeader + "'");
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() || trim(line) == "\r") continue;
    ++out.report.rows_read;
    Measurement m;
    std::string reason = parse_row(split_csv_line(line), m);
    if (reason.empty()) {
      try {
        add_measurement(out.cohort, std::move(m));
      } catch (const ValidationError& e) {
        reason = e.what();
      }
    }
    if (reason.empty()) {
      ++out.report.rows_accepted;
    } else {
      out.report.skipped.push_back({lineno, reason});
    }
  }
  // Subjects whose every row was rejected must not linger as empty entries.
  std::erase_if(out.cohort.subjects, [](const auto& kv) { return kv.second.empty(); });
  return out;
}

LoadedCohort load_cohort_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open cohort file " + path);
  return load_cohort(in);
}

void write_cohort(std::ostream& out, const Cohort& cohort) {
  out << kCohortHeader << '\n';
  for (const auto& [id, visits] : cohort.subjects) {
    for (const auto& m : visits) {
      out << m.subject_id << ',' << m.stratum << ',' << format_double(m.age) << ',';
      if (m.weight) out << format_double(*m.weight);
      out << ',';
      if (m.height) out << format_double(*m.height);
      out << '\n';
    }
  }
}

void write_cohort_file(const std::string& path, const Cohort& cohort) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write cohort file " + path);
  write_cohort(out, cohort);
}

Cohort filter_stratum(const Cohort& cohort, const std::string& stratum) {
  Cohort out;
  for (const auto& [id, visits] : cohort.subjects) {
    if (!visits.empty() && visits.front().stratum == stratum) {
      out.subjects.emplace(id, visits);
    }
  }
  if (!out.subjects.empty()) out.strata.insert(stratum);
  return out;
}

}  // namespace centile
