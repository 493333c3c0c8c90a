#include "centile/catchup.hpp"

#include <cmath>

#include "centile/errors.hpp"
#include "centile/qr_solver.hpp"

namespace centile {

namespace {
// Interquartile range of the standard normal distribution.
constexpr double kNormalIqr = 2.0 * 0.6744897501960817;
}  // namespace

std::string to_string(GrowthLabel label) {
  switch (label) {
    case GrowthLabel::CatchUp: return "catch-up";
    case GrowthLabel::CatchDown: return "catch-down";
    case GrowthLabel::Neutral: return "neutral";
  }
  return "neutral";
}

KnotVector default_catchup_knots() { return make_knots(3, 0.0, 2.0, {0.25, 0.5, 1.0}); }

double chart_zscore(const MarginalChart& chart, double t, double weight) {
  const double median = eval_quantile(chart, t, 0.5);
  const double iqr = eval_quantile(chart, t, 0.75) - eval_quantile(chart, t, 0.25);
  if (!(iqr > 0.0)) {
    throw ValidationError("chart_zscore: chart has no spread at age " + std::to_string(t));
  }
  return (weight - median) / (iqr / kNormalIqr);
}

CatchupRows catchup_rows(const Cohort& cohort, const MarginalChart& chart, const KnotVector& kv_b,
                         bool use_zscores, const CatchupOptions& options) {
  if (chart.kind != MeasurementKind::Weight) {
    throw ValidationError("catchup_rows: reference chart must be a weight chart");
  }
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> response;
  CatchupRows out;
  const int dim = kv_b.dimension();

  auto standardized = [&](double t, double w) {
    return use_zscores ? chart_zscore(chart, t, w) : w - eval_quantile(chart, t, 0.5);
  };

  for (const auto& [id, visits] : cohort.subjects) {
    const Measurement* prev = nullptr;
    for (std::size_t j = 0; j < visits.size(); ++j) {
      const Measurement& cur = visits[j];
      if (!cur.weight) continue;
      if (!chart.kv.contains(cur.age) || !kv_b.contains(cur.age)) {
        throw DomainError("catchup_rows: subject " + id + " has a visit at age " +
                          std::to_string(cur.age) + " outside the chart or b(t) domain");
      }
      if (prev == nullptr) {
        prev = &cur;
        continue;
      }
      const double gap = cur.age - prev->age;
      if (!(gap > 0.0)) {
        throw ValidationError("catchup_rows: subject " + id + " has non-increasing visit ages");
      }
      if (gap < options.min_gap) {
        ++out.skipped_short_gap;
        prev = &cur;
        continue;
      }
      // In deviation form the response (dW - dg)/D becomes (dev_j - dev_{j-1})/D.
      const double dev_prev = standardized(prev->age, *prev->weight);
      const double dev_cur = standardized(cur.age, *cur.weight);
      const double scale = use_zscores ? 1.0 : std::max(1.0, std::abs(*prev->weight));
      if (std::abs(dev_prev) <= 1e-12 * scale) {
        ++out.dropped_zero_rows;
        prev = &cur;
        continue;
      }
      rows.push_back(dev_prev * basis_at(kv_b, prev->age).transpose());
      response.push_back((dev_cur - dev_prev) / gap);
      out.provenance.push_back({id, j});
      prev = &cur;
    }
  }
  out.X.resize(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) out.X.row(static_cast<Eigen::Index>(i)) = rows[i];
  out.y = Eigen::Map<Vector>(response.data(), static_cast<Eigen::Index>(response.size()));
  return out;
}

CatchupModel fit_catchup(const Cohort& cohort, const MarginalChart& chart, const KnotVector& kv_b,
                         bool use_zscores, std::string reference_chart,
                         const CatchupOptions& options) {
  CatchupRows rows = catchup_rows(cohort, chart, kv_b, use_zscores, options);
  if (rows.X.rows() == 0) {
    throw ValidationError("fit_catchup: every deviation is zero; the cohort follows the median");
  }
  if (rows.X.rows() < kv_b.dimension()) {
    throw ValidationError("fit_catchup: " + std::to_string(rows.X.rows()) +
                          " informative rows for " + std::to_string(kv_b.dimension()) +
                          " basis functions");
  }
  QuantileFit fit = fit_quantile(rows.X, rows.y, 0.5);
  return CatchupModel{kv_b, std::move(fit.coefficients), use_zscores, std::move(reference_chart),
                      std::move(fit.residuals)};
}

CatchupValue eval_b(const CatchupModel& model, double t, double label_tol) {
  const double v = eval_spline(model.kv_b, model.coefficients, t);
  GrowthLabel label = GrowthLabel::Neutral;
  if (std::abs(v) >= label_tol) label = v < 0.0 ? GrowthLabel::CatchUp : GrowthLabel::CatchDown;
  return {v, label};
}

}  // namespace centile
