#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace centile {

/// One visit of one subject.  Ages are in years, weights in kg, heights in cm.
struct Measurement {
  std::string subject_id;
  std::string stratum;
  double age = 0.0;
  std::optional<double> weight;
  std::optional<double> height;

  friend bool operator==(const Measurement&, const Measurement&) = default;
};

/// Longitudinal cohort: per-subject visit lists sorted by strictly
/// increasing age.  Subjects are keyed (and iterated) by id.
struct Cohort {
  std::map<std::string, std::vector<Measurement>> subjects;
  std::set<std::string> strata;

  std::size_t measurement_count() const;
  friend bool operator==(const Cohort&, const Cohort&) = default;
};

/// Origin of a regression row: a subject and an index into its visit list.
struct RowProvenance {
  std::string subject_id;
  std::size_t visit = 0;
};

struct SkippedRow {
  std::size_t line = 0;  // 1-based line number in the input
  std::string reason;
};

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t rows_accepted = 0;
  std::vector<SkippedRow> skipped;
};

struct LoadedCohort {
  Cohort cohort;
  LoadReport report;
};

/// Column header of the cohort CSV format.
inline constexpr const char* kCohortHeader = "subject_id,stratum,age_years,weight_kg,height_cm";

/// Parses the cohort CSV format.  Invalid rows are skipped and listed in the
/// report; a malformed header throws ValidationError.
LoadedCohort load_cohort(std::istream& in);
LoadedCohort load_cohort_file(const std::string& path);

/// Writes a cohort in the CSV format, subjects in id order, visits by age.
void write_cohort(std::ostream& out, const Cohort& cohort);
void write_cohort_file(const std::string& path, const Cohort& cohort);

/// Inserts a measurement into an existing cohort, keeping ages sorted.
/// Throws ValidationError on a duplicate (subject, age) visit.
void add_measurement(Cohort& cohort, Measurement m);

/// Subset of the cohort restricted to one stratum.
Cohort filter_stratum(const Cohort& cohort, const std::string& stratum);

/// Shortest decimal text that reads back to exactly the same double.
std::string format_double(double v);

/// Strict decimal parse of a whole field; std::nullopt when not a finite number.
std::optional<double> parse_double(const std::string& text);

}  // namespace centile
