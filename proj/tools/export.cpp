#include "export.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "centile/cohort.hpp"
#include "centile/errors.hpp"

namespace centile::cli {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 500.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

const char* const kPalette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e",
                                "#e6ab02", "#a6761d", "#666666", "#1f78b4", "#b2df8a"};

std::string fmt(double v) { return format_double(v); }

// Rounded to 1e-6 of a user unit so the document stays small.
std::string coord(double v) { return format_double(std::round(v * 1e6) / 1e6); }

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

CurveSet chart_curves(const MarginalChart& chart, const std::vector<double>& ages) {
  CurveSet set;
  set.title = to_string(chart.kind) + " chart" + (chart.stratum.empty() ? "" : " (" + chart.stratum + ")");
  set.ages = ages;
  for (double tau : chart.taus) {
    set.labels.push_back(fmt(tau));
    std::vector<double> column;
    for (double t : ages) column.push_back(eval_quantile(chart, t, tau));
    set.values.push_back(std::move(column));
  }
  return set;
}

CurveSet catchup_curve(const CatchupModel& model, const std::vector<double>& ages) {
  CurveSet set;
  set.title = model.use_zscores ? "catch-up coefficient b(t), z-scores" : "catch-up coefficient b(t)";
  set.ages = ages;
  set.labels.push_back("b");
  std::vector<double> column;
  for (double t : ages) column.push_back(eval_b(model, t).value);
  set.values.push_back(std::move(column));
  return set;
}

std::string to_table(const CurveSet& curves) {
  std::string out = "age";
  for (const auto& label : curves.labels) out += "," + label;
  out += "\n";
  for (std::size_t a = 0; a < curves.ages.size(); ++a) {
    out += fmt(curves.ages[a]);
    for (const auto& column : curves.values) out += "," + fmt(column[a]);
    out += "\n";
  }
  return out;
}

Table parse_table(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("table: empty input");
  Table table;
  table.header = split(line);
  if (table.header.empty() || table.header[0] != "age") throw ValidationError("table: first column must be 'age'");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != table.header.size()) {
      throw ValidationError("table: line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                            " fields");
    }
    std::vector<double> row;
    for (const auto& cell : cells) {
      const auto v = parse_double(cell);
      if (!v) throw ValidationError("table: line " + std::to_string(line_no) + ": bad number '" + cell + "'");
      row.push_back(*v);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string to_svg(const CurveSet& curves) {
  if (curves.ages.size() < 2) throw ValidationError("svg export needs at least two grid ages");
  const double x0 = curves.ages.front(), x1 = curves.ages.back();
  double y0 = curves.values.front().front(), y1 = y0;
  for (const auto& column : curves.values) {
    for (double v : column) {
      y0 = std::min(y0, v);
      y1 = std::max(y1, v);
    }
  }
  if (y1 - y0 < 1e-12) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return kTop + (y1 - y) / (y1 - y0) * ph; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << kWidth << " " << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  s << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << curves.title
    << "</text>\n";
  s << "<g stroke=\"black\" fill=\"none\">\n";
  s << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph
    << "\"/>\n";
  s << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + ph << "\"/>\n";
  for (double t : curves.ages) {
    s << "<line x1=\"" << coord(sx(t)) << "\" y1=\"" << kTop + ph << "\" x2=\"" << coord(sx(t)) << "\" y2=\""
      << kTop + ph + 4 << "\"/>\n";
  }
  s << "</g>\n";

  // Label about ten of the ticks.
  const std::size_t n = curves.ages.size();
  const std::size_t every = std::max<std::size_t>(1, (n - 1) / 10);
  for (std::size_t a = 0; a < n; a += every) {
    s << "<text x=\"" << coord(sx(curves.ages[a])) << "\" y=\"" << kTop + ph + 18
      << "\" text-anchor=\"middle\">" << fmt(std::round(curves.ages[a] * 1000) / 1000) << "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double v = y0 + (y1 - y0) * k / 4.0;
    s << "<text x=\"" << kLeft - 6 << "\" y=\"" << coord(sy(v) + 4) << "\" text-anchor=\"end\">"
      << fmt(std::round(v * 1000) / 1000) << "</text>\n";
  }
  s << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">age (years)</text>\n";
  if (y0 < 0.0 && y1 > 0.0) {
    s << "<line x1=\"" << kLeft << "\" y1=\"" << coord(sy(0.0)) << "\" x2=\"" << kLeft + pw << "\" y2=\""
      << coord(sy(0.0)) << "\" stroke=\"#999999\" stroke-dasharray=\"4 3\"/>\n";
  }

  for (std::size_t c = 0; c < curves.values.size(); ++c) {
    const char* colour = kPalette[c % std::size(kPalette)];
    s << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" data-label=\""
      << curves.labels[c] << "\" points=\"";
    for (std::size_t a = 0; a < n; ++a) {
      if (a) s << ' ';
      s << coord(sx(curves.ages[a])) << ',' << coord(sy(curves.values[c][a]));
    }
    s << "\"/>\n";
    s << "<text x=\"" << kLeft + pw - 4 << "\" y=\"" << coord(sy(curves.values[c].back()) - 3)
      << "\" text-anchor=\"end\" fill=\"" << colour << "\">" << curves.labels[c] << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace centile::cli
