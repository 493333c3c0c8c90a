#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "centile/cohort.hpp"
#include "centile/linalg.hpp"
#include "centile/splines.hpp"

namespace centile {

enum class Covariate { HeightLinear, HeightSquared, AgeGap };

std::string to_string(Covariate c);
Covariate parse_covariate(const std::string& name);

/// Specification of a conditional quantile model
///
///   Q_tau(W_j | history) = sum_k beta_k B_k(t_j)
///                        + sum_l gamma_l(t_j) W_{j-l}
///                        + covariate terms,
///
/// where gamma_l is a constant, or expanded in the age basis when
/// time_varying_lag is set.
struct ConditionalModelSpec {
  double tau = 0.5;
  int n_lags = 1;
  std::vector<Covariate> covariates{Covariate::HeightLinear};  // unique; stored in canonical order
  bool time_varying_lag = false;

  friend bool operator==(const ConditionalModelSpec&, const ConditionalModelSpec&) = default;
};

/// Validates the spec and sorts its covariates into canonical order.
ConditionalModelSpec normalized(ConditionalModelSpec spec);

struct ConditionalModel {
  ConditionalModelSpec spec;
  KnotVector kv;
  Vector coefficients;  // [age basis | lag blocks | covariates]
  std::size_t training_rows = 0;
};

/// Expected coefficient count for a spec over a basis of dimension `basis_dim`.
int conditional_width(const ConditionalModelSpec& spec, int basis_dim);

struct ConditionalDesign {
  Matrix X;
  Vector y;
  std::vector<RowProvenance> provenance;
};

/// One row per weighed visit that has n_lags earlier weighed visits, all in
/// the knot domain.  Throws ValidationError when no row qualifies or a
/// selected height covariate has no height.
ConditionalDesign build_conditional_design(const Cohort& cohort, const ConditionalModelSpec& spec,
                                           const KnotVector& kv);

struct ConditionalFitOptions {
  double min_rows_per_column = 10.0;
};

/// Quantile regression at spec.tau on the conditional design.  Rank
/// deficiency is reported with the first offending block.
ConditionalModel fit_conditional(const Cohort& cohort, const ConditionalModelSpec& spec,
                                 const KnotVector& kv, const ConditionalFitOptions& options = {});

struct PriorVisit {
  double age = 0.0;
  double weight = 0.0;
};

/// Predicted tau-quantile of weight at age t given a prior path (oldest
/// first, exactly n_lags visits, ages increasing and below t) and height.
/// The path may be counterfactual.
double predict_conditional(const ConditionalModel& model, double t,
                           std::span<const PriorVisit> prior_path, std::optional<double> height);

enum class ScreeningLevel { None, Watch, Alert };
std::string to_string(ScreeningLevel level);

struct ScreeningFlag {
  ScreeningLevel level = ScreeningLevel::None;
  double observed = 0.0;
  std::map<double, double> thresholds;  // tau -> predicted conditional quantile
  /// Set when the upper threshold falls below the lower one; the level is
  /// then decided by the upper threshold alone.
  std::optional<std::string> warning;
};

struct ScreeningTaus {
  double watch = 0.90;
  double alert = 0.97;
};

/// Flags a visit against conditional models fitted at the watch and alert
/// taus: watch if above the watch threshold, alert if above the alert one.
ScreeningFlag screen(const std::map<double, ConditionalModel>& models, double age,
                     double observed_weight, std::span<const PriorVisit> prior_path,
                     std::optional<double> height, ScreeningTaus taus = {});

}  // namespace centile
