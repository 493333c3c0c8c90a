#pragma once

#include <string>
#include <vector>

#include "centile/charts.hpp"
#include "centile/cohort.hpp"
#include "centile/linalg.hpp"
#include "centile/splines.hpp"

namespace centile {

/// Rate-of-change model for catch-up growth,
///
///   (W_j - W_{j-1}) / D_j = (g(t_j) - g(t_{j-1})) / D_j
///                         + b(t_{j-1}) (W_{j-1} - g(t_{j-1})) + e_j,
///
/// with g the median curve of a marginal weight chart, D_j = t_j - t_{j-1},
/// and b expanded in a B-spline basis.  Negative b is catch-up growth.
struct CatchupModel {
  KnotVector kv_b;
  Vector coefficients;
  bool use_zscores = false;
  std::string reference_chart;  // identifies the chart that supplied g
  Vector residuals;
};

/// Cubic basis on [0, 2] years with knots at 0.25, 0.5 and 1.0.  Catch-up
/// happens early; the coarse tail keeps b stable where visit pairs thin out.
KnotVector default_catchup_knots();

struct CatchupOptions {
  double min_gap = 0.01;  // years; shorter visit gaps are skipped
};

struct CatchupRows {
  Matrix X;
  Vector y;
  std::vector<RowProvenance> provenance;  // visit index of the later visit
  std::size_t skipped_short_gap = 0;
  std::size_t dropped_zero_rows = 0;
};

/// Chart-standardized score (W - median(t)) / scale(t), where the scale is
/// the interquartile range of the chart divided by that of the standard
/// normal.  The chart's tau grid must span [0.25, 0.75].
double chart_zscore(const MarginalChart& chart, double t, double weight);

/// One row per consecutive pair of weighed visits.  Throws ValidationError
/// naming the subject when ages do not increase, DomainError when a visit
/// age is outside the chart or b domain.
CatchupRows catchup_rows(const Cohort& cohort, const MarginalChart& chart, const KnotVector& kv_b,
                         bool use_zscores, const CatchupOptions& options = {});

/// Median regression of the rows above; tau is fixed at 0.5.
CatchupModel fit_catchup(const Cohort& cohort, const MarginalChart& chart, const KnotVector& kv_b,
                         bool use_zscores, std::string reference_chart = {},
                         const CatchupOptions& options = {});

enum class GrowthLabel { CatchUp, CatchDown, Neutral };
std::string to_string(GrowthLabel label);

struct CatchupValue {
  double value = 0.0;
  GrowthLabel label = GrowthLabel::Neutral;
};

CatchupValue eval_b(const CatchupModel& model, double t, double label_tol = 0.01);

}  // namespace centile
