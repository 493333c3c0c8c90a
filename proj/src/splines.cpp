#include "centile/splines.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "centile/errors.hpp"

namespace centile {

KnotVector::KnotVector(int degree, double t_min, double t_max, std::vector<double> interior)
    : degree_(degree), t_min_(t_min), t_max_(t_max), interior_(std::move(interior)) {
  if (degree_ < 0) {
    throw ValidationError("knot vector: degree must be nonnegative");
  }
  if (!std::isfinite(t_min_) || !std::isfinite(t_max_) || !(t_min_ < t_max_)) {
    throw ValidationError("knot vector: boundary must satisfy t_min < t_max");
  }
  for (std::size_t i = 0; i < interior_.size(); ++i) {
    const double u = interior_[i];
    if (!(u > t_min_ && u < t_max_)) {
      throw ValidationError("knot vector: interior knot " + std::to_string(u) +
                            " is not strictly inside the boundary");
    }
    if (i > 0 && !(u > interior_[i - 1])) {
      throw ValidationError("knot vector: interior knots must be strictly increasing");
    }
  }
  full_.reserve(interior_.size() + 2 * (degree_ + 1));
  full_.insert(full_.end(), degree_ + 1, t_min_);
  full_.insert(full_.end(), interior_.begin(), interior_.end());
  full_.insert(full_.end(), degree_ + 1, t_max_);
}

KnotVector make_knots(int degree, double t_min, double t_max, std::vector<double> interior) {
  return KnotVector(degree, t_min, t_max, std::move(interior));
}

KnotVector default_infancy_knots() { return KnotVector(3, 0.0, 2.0, {0.25, 0.5, 1.0, 1.5}); }

namespace {

// Index s of the knot span with knots[s] <= t < knots[s+1], restricted to
// degree <= s < dimension.  t == t_max maps to the last nonempty span.
int find_span(const KnotVector& kv, double t) {
  const auto& u = kv.full_knots();
  const int p = kv.degree();
  const int n = kv.dimension();
  if (t >= kv.t_max()) {
    return n - 1;
  }
  auto it = std::upper_bound(u.begin() + p, u.begin() + n + 1, t);
  return static_cast<int>(it - u.begin()) - 1;
}

}  // namespace

Vector basis_at(const KnotVector& kv, double t) {
  if (!kv.contains(t)) {
    throw DomainError("basis_at: age " + std::to_string(t) + " outside [" +
                      std::to_string(kv.t_min()) + ", " + std::to_string(kv.t_max()) + "]");
  }
  const auto& u = kv.full_knots();
  const int p = kv.degree();
  const int span = find_span(kv, t);

  // Cox-de Boor triangle for the p+1 functions that are nonzero on the span.
  std::vector<double> local(p + 1, 0.0), left(p + 1), right(p + 1);
  local[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = t - u[span + 1 - j];
    right[j] = u[span + j] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = local[r] / (right[r + 1] + left[j - r]);
      local[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    local[j] = saved;
  }

  Vector out = Vector::Zero(kv.dimension());
  for (int r = 0; r <= p; ++r) {
    out[span - p + r] = local[r];
  }
  return out;
}

Matrix design_matrix(const KnotVector& kv, std::span<const double> ages) {
  Matrix m(static_cast<Eigen::Index>(ages.size()), kv.dimension());
  for (std::size_t i = 0; i < ages.size(); ++i) {
    if (!kv.contains(ages[i])) {
      throw DomainError("design_matrix: row " + std::to_string(i) + " has age " +
                        std::to_string(ages[i]) + " outside the knot domain");
    }
    m.row(static_cast<Eigen::Index>(i)) = basis_at(kv, ages[i]).transpose();
  }
  return m;
}

double eval_spline(const KnotVector& kv, const Vector& coef, double t) {
  return basis_at(kv, t).dot(coef);
}

}  // namespace centile
