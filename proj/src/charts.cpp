#include "centile/charts.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "centile/errors.hpp"

namespace centile {

namespace {
constexpr double kCrossingTol = 1e-9;
}

std::string to_string(MeasurementKind kind) {
  return kind == MeasurementKind::Weight ? "weight" : "height";
}

MeasurementKind parse_measurement_kind(const std::string& name) {
  if (name == "weight") return MeasurementKind::Weight;
  if (name == "height") return MeasurementKind::Height;
  throw ValidationError("unknown measurement kind '" + name + "'");
}

const std::vector<double>& default_taus() {
  static const std::vector<double> taus = {0.03, 0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95, 0.97};
  return taus;
}

void validate_taus(std::span<const double> taus) {
  if (taus.empty()) throw ValidationError("tau grid is empty");
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (!(taus[i] > 0.0 && taus[i] < 1.0)) {
      throw ValidationError("tau grid values must lie in (0,1)");
    }
    if (i > 0 && !(taus[i] > taus[i - 1])) {
      throw ValidationError("tau grid must be strictly increasing");
    }
  }
}

MarginalFit fit_marginal(const Cohort& cohort, MeasurementKind kind, const std::string& stratum,
                         const KnotVector& kv, std::span<const double> taus) {
  validate_taus(taus);
  std::vector<double> ages;
  std::vector<double> values;
  std::size_t total = 0;
  std::size_t skipped = 0;
  for (const auto& [id, visits] : cohort.subjects) {
    for (const auto& m : visits) {
      if (!stratum.empty() && m.stratum != stratum) continue;
      const auto& v = kind == MeasurementKind::Weight ? m.weight : m.height;
      if (!v) continue;
      ++total;
      if (!kv.contains(m.age)) {
        ++skipped;
        continue;
      }
      ages.push_back(m.age);
      values.push_back(*v);
    }
  }
  if (total > 0 && 10 * skipped > total) {
    throw ValidationError("fit_marginal: " + std::to_string(skipped) + " of " +
                          std::to_string(total) + " observations lie outside the knot domain");
  }
  if (ages.size() < static_cast<std::size_t>(kv.dimension())) {
    throw ValidationError("fit_marginal: insufficient data (" + std::to_string(ages.size()) +
                          " observations for " + std::to_string(kv.dimension()) +
                          " basis functions)");
  }

  const Matrix X = design_matrix(kv, ages);
  const Vector y = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  MarginalFit out{MarginalChart{kind, stratum, kv, std::vector<double>(taus.begin(), taus.end()),
                                Matrix(static_cast<Eigen::Index>(taus.size()), kv.dimension()),
                                ages.size(), std::nullopt},
                  skipped,
                  {}};
  for (std::size_t r = 0; r < taus.size(); ++r) {
    QuantileFit fit = fit_quantile(X, y, taus[r]);
    out.chart.coef.row(static_cast<Eigen::Index>(r)) = fit.coefficients.transpose();
    out.fits.push_back(std::move(fit));
  }
  return out;
}

std::vector<double> curve_values(const MarginalChart& chart, double t) {
  if (chart.repaired) {
    const auto& grid = chart.repaired->ages;
    auto it = std::lower_bound(grid.begin(), grid.end(), t);
    if (it != grid.end() && *it == t) {
      const auto row = chart.repaired->values.row(it - grid.begin());
      return std::vector<double>(row.begin(), row.end());
    }
  }
  const Vector q = chart.coef * basis_at(chart.kv, t);
  return std::vector<double>(q.begin(), q.end());
}

double eval_quantile(const MarginalChart& chart, double t, double tau) {
  const auto& taus = chart.taus;
  if (!(tau >= taus.front() && tau <= taus.back())) {
    throw DomainError("eval_quantile: tau " + std::to_string(tau) + " outside the chart's grid [" +
                      std::to_string(taus.front()) + ", " + std::to_string(taus.back()) + "]");
  }
  const std::vector<double> q = curve_values(chart, t);
  auto it = std::lower_bound(taus.begin(), taus.end(), tau);
  const std::size_t hi = static_cast<std::size_t>(it - taus.begin());
  if (*it == tau) return q[hi];
  const std::size_t lo = hi - 1;
  const double w = (tau - taus[lo]) / (taus[hi] - taus[lo]);
  return (1.0 - w) * q[lo] + w * q[hi];
}

std::string PercentileReport::to_string() const {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", percentile);
  switch (position) {
    case Position::Below: return std::string("< ") + buf;
    case Position::Above: return std::string("> ") + buf;
    case Position::Within: break;
  }
  return buf;
}

PercentileReport percentile_from_values(std::span<const double> taus,
                                        std::span<const double> values, double value) {
  if (taus.size() != values.size() || taus.empty()) {
    throw ValidationError("percentile: tau and value grids differ in size");
  }
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    if (values[i + 1] < values[i] - kCrossingTol) {
      throw ValidationError("percentile: quantile curves cross (tau " + std::to_string(taus[i]) +
                            " above tau " + std::to_string(taus[i + 1]) +
                            "); repair crossings first");
    }
  }
  using P = PercentileReport::Position;
  if (value < values.front()) return {P::Below, 100.0 * taus.front()};
  if (value > values.back()) return {P::Above, 100.0 * taus.back()};
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (value == values[i]) return {P::Within, 100.0 * taus[i]};
    if (i + 1 < values.size() && value > values[i] && value < values[i + 1]) {
      const double w = (value - values[i]) / (values[i + 1] - values[i]);
      return {P::Within, 100.0 * (taus[i] + w * (taus[i + 1] - taus[i]))};
    }
  }
  // Reached only when adjacent values are tied within the crossing tolerance.
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (value <= values[i]) return {P::Within, 100.0 * taus[i]};
  }
  return {P::Above, 100.0 * taus.back()};
}

PercentileReport percentile_of(const MarginalChart& chart, double t, double value) {
  const std::vector<double> q = curve_values(chart, t);
  return percentile_from_values(chart.taus, q, value);
}

std::vector<Crossing> detect_crossings(const MarginalChart& chart, std::span<const double> ages) {
  std::vector<Crossing> out;
  for (double t : ages) {
    const std::vector<double> q = curve_values(chart, t);
    for (std::size_t i = 0; i + 1 < q.size(); ++i) {
      if (q[i + 1] < q[i] - kCrossingTol) out.push_back({t, chart.taus[i], chart.taus[i + 1]});
    }
  }
  return out;
}

RepairedGrid repair_crossings(const MarginalChart& chart, std::span<const double> ages) {
  RepairedGrid grid;
  grid.ages.assign(ages.begin(), ages.end());
  grid.values.resize(static_cast<Eigen::Index>(ages.size()),
                     static_cast<Eigen::Index>(chart.taus.size()));
  for (std::size_t a = 0; a < ages.size(); ++a) {
    std::vector<double> q = curve_values(chart, ages[a]);
    std::sort(q.begin(), q.end());
    for (std::size_t k = 0; k < q.size(); ++k) {
      grid.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(k)) = q[k];
    }
  }
  return grid;
}

MarginalChart with_repaired_grid(const MarginalChart& chart, std::span<const double> ages) {
  if (!std::is_sorted(ages.begin(), ages.end()) ||
      std::adjacent_find(ages.begin(), ages.end()) != ages.end()) {
    throw ValidationError("repair grid ages must be strictly increasing");
  }
  MarginalChart out = chart;
  out.repaired.reset();
  out.repaired = repair_crossings(out, ages);
  return out;
}

std::vector<double> age_grid(double t_min, double t_max, std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {t_min};
  std::vector<double> out(n);
  const double step = (t_max - t_min) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) out[i] = t_min + step * static_cast<double>(i);
  out[n - 1] = t_max;
  return out;
}

std::vector<double> age_grid(const KnotVector& kv, std::size_t n) {
  return age_grid(kv.t_min(), kv.t_max(), n);
}

}  // namespace centile
