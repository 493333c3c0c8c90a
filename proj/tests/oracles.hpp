#pragma once

// Independent reference computations used by the tests.  Nothing here calls
// into the solver or the peer selection code it checks.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "centile/cohort.hpp"
#include "centile/reference.hpp"

namespace centile::oracle {

inline double check_loss_sum(const Eigen::VectorXd& r, double tau) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) s += r[i] >= 0 ? tau * r[i] : (tau - 1.0) * r[i];
  return s;
}

/// Minimum check loss over all coefficient vectors that interpolate some
/// p-subset of the observations.  An optimum always exists among these
/// vertices when X has full column rank.
inline double brute_force_min_loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> idx(p);
  for (int i = 0; i < p; ++i) idx[i] = i;
  while (true) {
    Eigen::MatrixXd A(p, p);
    Eigen::VectorXd b(p);
    for (int k = 0; k < p; ++k) {
      A.row(k) = X.row(idx[k]);
      b[k] = y[idx[k]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (lu.isInvertible()) {
      const Eigen::VectorXd beta = lu.solve(b);
      best = std::min(best, check_loss_sum(y - X * beta, tau));
    }
    int k = p - 1;
    while (k >= 0 && idx[k] == n - p + k) --k;
    if (k < 0) break;
    ++idx[k];
    for (int m = k + 1; m < p; ++m) idx[m] = idx[m - 1] + 1;
  }
  return best;
}

/// Peer selection by a literal double loop over subjects and visits.
inline std::vector<std::string> brute_force_peers(const Cohort& cohort, const std::string& probe,
                                                  const ReferenceCriteria& c) {
  const Measurement* anchor = nullptr;
  for (const auto& m : cohort.subjects.at(probe)) {
    if (!m.weight || std::abs(m.age - c.anchor_age) > c.age_window) continue;
    if (!anchor || std::abs(m.age - c.anchor_age) < std::abs(anchor->age - c.anchor_age)) anchor = &m;
  }
  std::vector<std::string> out;
  if (!anchor) return out;
  for (const auto& [id, visits] : cohort.subjects) {
    if (id == probe) continue;
    bool has_anchor = false;
    bool has_target = false;
    for (const auto& m : visits) {
      if (!m.weight) continue;
      if (std::abs(m.age - c.anchor_age) <= c.age_window &&
          std::abs(*m.weight - *anchor->weight) <= c.weight_window) {
        has_anchor = true;
      }
      if (std::abs(m.age - c.target_age) <= c.target_window) has_target = true;
    }
    if (has_anchor && has_target) out.push_back(id);
  }
  return out;
}

/// Midrank percentile by explicit counting over sorted values.
inline double midrank_percentile(std::vector<double> values, double x) {
  std::sort(values.begin(), values.end());
  std::size_t below = std::lower_bound(values.begin(), values.end(), x) - values.begin();
  std::size_t upto = std::upper_bound(values.begin(), values.end(), x) - values.begin();
  return 100.0 * (static_cast<double>(below) + 0.5 * static_cast<double>(upto - below)) /
         static_cast<double>(values.size());
}

}  // namespace centile::oracle
