#pragma once

#include <span>
#include <vector>

#include "centile/linalg.hpp"

namespace centile {

/// Clamped B-spline knot vector over an age interval.
///
/// The boundary knots are repeated degree+1 times; interior knots are simple.
/// Basis functions are right-continuous on half-open knot spans, except at
/// the upper boundary where the last basis function evaluates to 1.
class KnotVector {
 public:
  /// Throws ValidationError when the boundary is reversed or the interior
  /// knots are not strictly increasing and strictly inside the boundary.
  KnotVector(int degree, double t_min, double t_max, std::vector<double> interior);

  int degree() const { return degree_; }
  double t_min() const { return t_min_; }
  double t_max() const { return t_max_; }
  const std::vector<double>& interior() const { return interior_; }
  const std::vector<double>& full_knots() const { return full_; }

  /// Number of basis functions: interior knots + degree + 1.
  int dimension() const { return static_cast<int>(interior_.size()) + degree_ + 1; }

  bool contains(double t) const { return t >= t_min_ && t <= t_max_; }

  friend bool operator==(const KnotVector&, const KnotVector&) = default;

 private:
  int degree_;
  double t_min_;
  double t_max_;
  std::vector<double> interior_;
  std::vector<double> full_;
};

KnotVector make_knots(int degree, double t_min, double t_max, std::vector<double> interior);

/// Default knot set for weight and height charts over ages 0-2 years.
KnotVector default_infancy_knots();

/// Values of all basis functions at t.  Throws DomainError outside
/// [t_min, t_max]; there is no extrapolation.
Vector basis_at(const KnotVector& kv, double t);

/// Row i holds basis_at(kv, ages[i]).  The error message names the first
/// out-of-domain row.
Matrix design_matrix(const KnotVector& kv, std::span<const double> ages);

/// Evaluates sum_j coef[j] * B_j(t).
double eval_spline(const KnotVector& kv, const Vector& coef, double t);

}  // namespace centile
