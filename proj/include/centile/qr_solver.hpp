#pragma once

#include "centile/linalg.hpp"

namespace centile {

/// Result of a linear quantile regression fit.
struct QuantileFit {
  double tau = 0.5;
  Vector coefficients;
  Vector residuals;
  double loss = 0.0;
  int n_interpolated = 0;
  int iterations = 0;
};

/// Check loss rho_tau(r) = r * (tau - 1[r < 0]).  Throws DomainError unless
/// 0 < tau < 1.
double check_loss(double r, double tau);

/// Sum of check losses over a residual vector.
double total_check_loss(const Vector& residuals, double tau);

/// Throws DomainError unless tau lies strictly inside (0,1).
void require_tau(double tau);

/// Throws RankDeficientError when X does not have full column rank
/// (column-pivoted QR, relative threshold 1e-10).
void require_full_rank(const Matrix& X);

/// Minimizes sum_i rho_tau(y_i - x_i b) exactly.
///
/// The solver walks between vertices of the problem (coefficient vectors
/// that interpolate cols(X) observations).  At each vertex it prices the
/// 2p edges obtained by releasing one interpolated observation above or
/// below the fit, and follows the steepest one with an exact line search
/// across the breakpoints of the piecewise-linear loss.  Exactly zero
/// residuals are ordered by a fixed symbolic perturbation of y, so
/// degenerate steps cannot cycle.  Ties are broken by lowest index, making
/// the returned vertex deterministic.
///
/// Throws ValidationError on empty or mismatched input and
/// RankDeficientError for a rank-deficient design.  No intercept is added.
QuantileFit fit_quantile(const Matrix& X, const Vector& y, double tau);

/// Subgradient optimality test: true iff multipliers in [tau-1, tau] can be
/// assigned to the (numerically) zero residuals so that the subgradient of
/// the loss at `coefficients` vanishes, within `tol` (relative).
bool verify_optimality(const Matrix& X, const Vector& y, double tau, const Vector& coefficients,
                       double tol = 1e-8);

}  // namespace centile
