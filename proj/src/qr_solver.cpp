#include "centile/qr_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "centile/errors.hpp"

namespace centile {

void require_tau(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw DomainError("tau must lie in (0,1), got " + std::to_string(tau));
  }
}

double check_loss(double r, double tau) {
  require_tau(tau);
  return r < 0.0 ? r * (tau - 1.0) : r * tau;
}

double total_check_loss(const Vector& residuals, double tau) {
  require_tau(tau);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < residuals.size(); ++i) {
    const double r = residuals[i];
    sum += r < 0.0 ? r * (tau - 1.0) : r * tau;
  }
  return sum;
}

void require_full_rank(const Matrix& X) {
  Eigen::ColPivHouseholderQR<Matrix> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < X.cols()) {
    throw RankDeficientError("design has rank " + std::to_string(qr.rank()) + " < " +
                             std::to_string(X.cols()) + " columns");
  }
}

namespace {

// splitmix64 finalizer; maps an observation index to a fixed value in (0,1).
double perturbation(std::uint64_t i) {
  std::uint64_t z = i + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return (static_cast<double>(z >> 11) + 0.5) * 0x1.0p-53;
}

struct Breakpoint {
  double step;       // real part of the step length
  double step_eps;   // coefficient of the symbolic perturbation
  Eigen::Index row;

  bool operator<(const Breakpoint& o) const {
    if (step != o.step) return step < o.step;
    if (step_eps != o.step_eps) return step_eps < o.step_eps;
    return row < o.row;
  }
};

// Picks p linearly independent rows; doubles as the rank check.
std::vector<Eigen::Index> initial_basis(const Matrix& X) {
  Eigen::ColPivHouseholderQR<Matrix> qr(X.transpose());
  qr.setThreshold(1e-10);
  if (qr.rank() < X.cols()) {
    throw RankDeficientError("design has rank " + std::to_string(qr.rank()) + " < " +
                             std::to_string(X.cols()) + " columns");
  }
  std::vector<Eigen::Index> basis(X.cols());
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index k = 0; k < X.cols(); ++k) basis[k] = perm[k];
  return basis;
}

}  // namespace

QuantileFit fit_quantile(const Matrix& X, const Vector& y, double tau) {
  require_tau(tau);
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (n == 0 || p == 0) {
    throw ValidationError("fit_quantile: empty data");
  }
  if (y.size() != n) {
    throw ValidationError("fit_quantile: design has " + std::to_string(n) +
                          " rows but response has " + std::to_string(y.size()));
  }
  if (n < p) {
    throw ValidationError("fit_quantile: fewer observations than columns");
  }
  if (!X.allFinite() || !y.allFinite()) {
    throw ValidationError("fit_quantile: non-finite input");
  }

  std::vector<Eigen::Index> basis = initial_basis(X);
  std::vector<char> in_basis(n, 0);
  for (auto i : basis) in_basis[i] = 1;

  Vector pert(n);
  for (Eigen::Index i = 0; i < n; ++i) pert[i] = perturbation(static_cast<std::uint64_t>(i));

  const double zero_tol = 1e-11 * (1.0 + y.cwiseAbs().maxCoeff());
  const long max_iter = 100 * static_cast<long>(n) + 1000;

  Matrix Xh(p, p), Binv(p, p);
  Vector beta(p), yh(p), ph(p), resid(n), qres(n), weights(n), dir(n);
  std::vector<signed char> sign(n);
  std::vector<Breakpoint> ahead;
  ahead.reserve(n);

  QuantileFit fit;
  fit.tau = tau;
  long iter = 0;
  for (;; ++iter) {
    if (iter > max_iter) {
      throw Error("fit_quantile: iteration limit exceeded");
    }
    for (Eigen::Index k = 0; k < p; ++k) {
      Xh.row(k) = X.row(basis[k]);
      yh[k] = y[basis[k]];
      ph[k] = pert[basis[k]];
    }
    Eigen::FullPivLU<Matrix> lu(Xh);
    if (!lu.isInvertible()) {
      throw Error("fit_quantile: singular basis encountered");
    }
    Binv = lu.inverse();
    beta.noalias() = Binv * yh;
    resid = y;
    resid.noalias() -= X * beta;
    const Vector pshift = Binv * ph;
    qres = pert;
    qres.noalias() -= X * pshift;

    // Each nonbasic residual gets a strict sign; exact zeros take the sign
    // of their perturbation term.
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_basis[i]) {
        sign[i] = 0;
        weights[i] = 0.0;
        continue;
      }
      const double r = resid[i];
      if (std::abs(r) > zero_tol) {
        sign[i] = r > 0.0 ? 1 : -1;
      } else {
        sign[i] = qres[i] >= 0.0 ? 1 : -1;
      }
      weights[i] = sign[i] > 0 ? -tau : 1.0 - tau;
    }
    if (resid.cwiseAbs().maxCoeff() <= zero_tol) {
      break;  // interpolates every observation: loss is zero
    }

    // Directional derivatives along the 2p edges leaving this vertex.
    const Vector grad = Binv.transpose() * (X.transpose() * weights);
    double best = 0.0;
    Eigen::Index leave = -1;
    int direction = 0;
    const double opt_tol = 1e-9 * std::max(1.0, grad.cwiseAbs().maxCoeff());
    for (Eigen::Index k = 0; k < p; ++k) {
      const double up = grad[k] + (1.0 - tau);
      const double down = -grad[k] + tau;
      if (up < -opt_tol && (leave < 0 || up < best)) {
        best = up;
        leave = k;
        direction = 1;
      }
      if (down < -opt_tol && (leave < 0 || down < best)) {
        best = down;
        leave = k;
        direction = -1;
      }
    }
    if (leave < 0) {
      break;
    }

    // Exact line search: the loss along the edge is convex piecewise linear,
    // and crossing breakpoint i raises the slope by |a_i|.
    dir.noalias() = X * Binv.col(leave);
    if (direction < 0) dir = -dir;
    const double a_tol = 1e-13 * std::max(1.0, dir.cwiseAbs().maxCoeff());
    ahead.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_basis[i]) continue;
      const double a = dir[i];
      if (std::abs(a) <= a_tol || sign[i] * a <= 0.0) continue;
      const double r = resid[i];
      const double real_step = std::abs(r) > zero_tol ? r / a : 0.0;
      ahead.push_back({real_step, qres[i] / a, i});
    }
    if (ahead.empty()) {
      throw Error("fit_quantile: unbounded edge (design not full rank?)");
    }
    double slope = best;
    Eigen::Index enter = -1;
    // Partial sort in growing chunks; the entering row is usually early.
    std::size_t sorted = 0;
    std::size_t chunk = std::min<std::size_t>(ahead.size(), 64);
    while (enter < 0) {
      std::partial_sort(ahead.begin() + sorted, ahead.begin() + chunk, ahead.end());
      for (std::size_t j = sorted; j < chunk; ++j) {
        slope += std::abs(dir[ahead[j].row]);
        if (slope >= 0.0) {
          enter = ahead[j].row;
          break;
        }
      }
      if (enter >= 0) break;
      if (chunk == ahead.size()) {
        // Slope stays negative only through round-off; take the last breakpoint.
        enter = ahead.back().row;
        break;
      }
      sorted = chunk;
      chunk = std::min(ahead.size(), chunk * 4);
    }
    in_basis[basis[leave]] = 0;
    in_basis[enter] = 1;
    basis[leave] = enter;
  }

  fit.coefficients = beta;
  fit.residuals = y - X * beta;
  fit.loss = total_check_loss(fit.residuals, tau);
  fit.n_interpolated = static_cast<int>((fit.residuals.array().abs() <= zero_tol).count());
  fit.iterations = static_cast<int>(iter);
  return fit;
}

namespace {

// Bounded-variable least squares: min ||A x - b|| subject to lo <= x <= hi,
// by an active-set method.  Returns the minimizer found.
Vector bounded_least_squares(const Matrix& A, const Vector& b, double lo, double hi) {
  const Eigen::Index m = A.cols();
  enum class State { Lower, Upper, Free };
  std::vector<State> state(m, State::Lower);
  Vector x = Vector::Constant(m, lo);
  std::vector<char> blocked(m, 0);
  const double eps = 1e-14 * std::max(1.0, A.cwiseAbs().maxCoeff());
  const int max_outer = static_cast<int>(10 * m + 100);

  for (int outer = 0; outer < max_outer; ++outer) {
    const Vector w = A.transpose() * (b - A * x);
    Eigen::Index pick = -1;
    double best = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (blocked[j]) continue;
      double gain = 0.0;
      if (state[j] == State::Lower && w[j] > eps) gain = w[j];
      if (state[j] == State::Upper && w[j] < -eps) gain = -w[j];
      if (gain > best) {
        best = gain;
        pick = j;
      }
    }
    if (pick < 0) break;
    state[pick] = State::Free;

    bool progressed = false;
    for (int inner = 0; inner < max_outer; ++inner) {
      std::vector<Eigen::Index> free_idx;
      Vector rhs = b;
      for (Eigen::Index j = 0; j < m; ++j) {
        if (state[j] == State::Free) {
          free_idx.push_back(j);
        } else {
          rhs -= A.col(j) * x[j];
        }
      }
      if (free_idx.empty()) break;
      Matrix Af(A.rows(), static_cast<Eigen::Index>(free_idx.size()));
      for (std::size_t k = 0; k < free_idx.size(); ++k) Af.col(k) = A.col(free_idx[k]);
      const Vector z = Af.completeOrthogonalDecomposition().solve(rhs);

      double alpha = 1.0;
      for (std::size_t k = 0; k < free_idx.size(); ++k) {
        const double xj = x[free_idx[k]];
        if (z[k] > hi) alpha = std::min(alpha, (hi - xj) / (z[k] - xj));
        if (z[k] < lo) alpha = std::min(alpha, (lo - xj) / (z[k] - xj));
      }
      alpha = std::clamp(alpha, 0.0, 1.0);
      for (std::size_t k = 0; k < free_idx.size(); ++k) {
        const Eigen::Index j = free_idx[k];
        const double next = x[j] + alpha * (z[k] - x[j]);
        if (std::abs(next - x[j]) > 0.0) progressed = true;
        x[j] = next;
      }
      if (alpha >= 1.0) break;
      for (Eigen::Index j : free_idx) {
        if (x[j] >= hi - 1e-15) {
          x[j] = hi;
          state[j] = State::Upper;
        } else if (x[j] <= lo + 1e-15) {
          x[j] = lo;
          state[j] = State::Lower;
        }
      }
    }
    if (progressed) {
      std::fill(blocked.begin(), blocked.end(), 0);
    } else {
      blocked[pick] = 1;
    }
  }
  return x;
}

// Projected coordinate descent on the same problem, starting from x.
void polish(const Matrix& A, const Vector& b, double lo, double hi, Vector& x, double target) {
  Vector resid = b - A * x;
  const Vector norms = A.colwise().squaredNorm().transpose();
  for (int sweep = 0; sweep < 20000; ++sweep) {
    if (resid.cwiseAbs().maxCoeff() <= target) return;
    double moved = 0.0;
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      if (norms[j] == 0.0) continue;
      const double next = std::clamp(x[j] + A.col(j).dot(resid) / norms[j], lo, hi);
      const double delta = next - x[j];
      if (delta != 0.0) {
        resid -= delta * A.col(j);
        x[j] = next;
        moved = std::max(moved, std::abs(delta));
      }
    }
    if (moved == 0.0) return;
  }
}

}  // namespace

bool verify_optimality(const Matrix& X, const Vector& y, double tau, const Vector& coefficients,
                       double tol) {
  if (X.rows() != y.size() || X.cols() != coefficients.size() || !(tau > 0.0 && tau < 1.0)) {
    return false;
  }
  const Vector resid = y - X * coefficients;
  const double zero_tol = tol * (1.0 + (y.size() ? y.cwiseAbs().maxCoeff() : 0.0));
  Vector g = Vector::Zero(X.cols());
  std::vector<Eigen::Index> zeros;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    if (std::abs(resid[i]) <= zero_tol) {
      zeros.push_back(i);
    } else if (resid[i] > 0.0) {
      g += tau * X.row(i).transpose();
    } else {
      g -= (1.0 - tau) * X.row(i).transpose();
    }
  }
  Vector lambda;
  Matrix A(X.cols(), static_cast<Eigen::Index>(zeros.size()));
  for (std::size_t k = 0; k < zeros.size(); ++k) A.col(k) = X.row(zeros[k]).transpose();
  Vector mismatch = g;
  if (!zeros.empty()) {
    lambda = bounded_least_squares(A, -g, tau - 1.0, tau);
    polish(A, -g, tau - 1.0, tau, lambda, 0.5 * tol);
    mismatch += A * lambda;
  }
  const double scale = 1.0 + X.cwiseAbs().colwise().sum().maxCoeff();
  return mismatch.cwiseAbs().maxCoeff() <= tol * scale;
}

}  // namespace centile
