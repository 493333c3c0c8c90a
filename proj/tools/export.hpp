#pragma once

#include <string>
#include <vector>

#include "centile/catchup.hpp"
#include "centile/charts.hpp"

namespace centile::cli {

/// Curves sampled on a common age grid: values[c][a] is curve c at ages[a].
struct CurveSet {
  std::string title;
  std::vector<double> ages;
  std::vector<std::string> labels;
  std::vector<std::vector<double>> values;
};

CurveSet chart_curves(const MarginalChart& chart, const std::vector<double>& ages);
CurveSet catchup_curve(const CatchupModel& model, const std::vector<double>& ages);

/// CSV with an "age" column followed by one column per curve.
std::string to_table(const CurveSet& curves);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Inverse of to_table; throws ValidationError on malformed input.
Table parse_table(const std::string& text);

/// Standalone SVG line plot, one polyline per curve.
std::string to_svg(const CurveSet& curves);

}  // namespace centile::cli
