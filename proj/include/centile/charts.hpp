#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "centile/cohort.hpp"
#include "centile/linalg.hpp"
#include "centile/qr_solver.hpp"
#include "centile/splines.hpp"

namespace centile {

enum class MeasurementKind { Weight, Height };

std::string to_string(MeasurementKind kind);
MeasurementKind parse_measurement_kind(const std::string& name);

/// Quantile curves evaluated on an age grid after monotone rearrangement.
/// values(a, k) is the tau_k quantile at ages[a]; each row is sorted.
struct RepairedGrid {
  std::vector<double> ages;
  Matrix values;

  friend bool operator==(const RepairedGrid&, const RepairedGrid&) = default;
};

/// Marginal growth chart: one spline quantile curve per tau.
struct MarginalChart {
  MeasurementKind kind = MeasurementKind::Weight;
  std::string stratum;
  KnotVector kv;
  std::vector<double> taus;  // strictly increasing, in (0,1)
  Matrix coef;               // rows = taus, cols = basis dimension
  std::size_t fitted_n = 0;
  std::optional<RepairedGrid> repaired;

  /// Coefficients of the tau_r curve.
  Vector curve(std::size_t r) const { return coef.row(static_cast<Eigen::Index>(r)).transpose(); }
};

/// Percentile grid that brackets the 3rd through 97th percentiles.
const std::vector<double>& default_taus();

/// Throws ValidationError unless taus is nonempty, strictly increasing and
/// inside (0,1).
void validate_taus(std::span<const double> taus);

struct MarginalFit {
  MarginalChart chart;
  std::size_t skipped_out_of_domain = 0;
  std::vector<QuantileFit> fits;  // one per tau, same order as chart.taus
};

/// Fits one spline quantile regression per tau on all observations of
/// `kind` in the stratum (empty stratum pools every stratum).  Ages outside
/// the knot domain are skipped; more than 10% skipped is an error.
MarginalFit fit_marginal(const Cohort& cohort, MeasurementKind kind, const std::string& stratum,
                         const KnotVector& kv, std::span<const double> taus);

/// Value of every tau curve at age t, in tau order.  At ages of a stored
/// repaired grid the rearranged values are returned.
std::vector<double> curve_values(const MarginalChart& chart, double t);

/// Quantile at (t, tau); linear interpolation in tau between grid curves.
/// Throws DomainError for t outside the knots or tau outside the grid range.
double eval_quantile(const MarginalChart& chart, double t, double tau);

struct PercentileReport {
  enum class Position { Below, Within, Above };
  Position position = Position::Within;
  double percentile = 0.0;  // 100*tau; the clipping bound for Below/Above

  /// "43.2", "< 3" or "> 97".
  std::string to_string() const;
};

/// Inverts sorted quantile values at one age.  Throws ValidationError when
/// the values decrease (curves cross).
PercentileReport percentile_from_values(std::span<const double> taus,
                                        std::span<const double> values, double value);

PercentileReport percentile_of(const MarginalChart& chart, double t, double value);

struct Crossing {
  double age;
  double tau_lower;
  double tau_upper;
  friend bool operator==(const Crossing&, const Crossing&) = default;
};

/// Every (age, tau_i, tau_{i+1}) where the higher curve lies more than 1e-9
/// below the lower one.
std::vector<Crossing> detect_crossings(const MarginalChart& chart, std::span<const double> ages);

/// Curve values on the grid, sorted in tau at each age.
RepairedGrid repair_crossings(const MarginalChart& chart, std::span<const double> ages);

/// Copy of the chart carrying the repaired grid for `ages`.
MarginalChart with_repaired_grid(const MarginalChart& chart, std::span<const double> ages);

/// Evenly spaced ages from t_min to t_max inclusive.
std::vector<double> age_grid(double t_min, double t_max, std::size_t n);
std::vector<double> age_grid(const KnotVector& kv, std::size_t n);

}  // namespace centile
