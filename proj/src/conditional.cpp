#include "centile/conditional.hpp"

#include <algorithm>
#include <cmath>

#include "centile/errors.hpp"
#include "centile/qr_solver.hpp"

namespace centile {

std::string to_string(Covariate c) {
  switch (c) {
    case Covariate::HeightLinear: return "height_linear";
    case Covariate::HeightSquared: return "height_squared";
    case Covariate::AgeGap: return "age_gap";
  }
  return "height_linear";
}

Covariate parse_covariate(const std::string& name) {
  if (name == "height_linear") return Covariate::HeightLinear;
  if (name == "height_squared") return Covariate::HeightSquared;
  if (name == "age_gap") return Covariate::AgeGap;
  throw ValidationError("unknown covariate '" + name + "'");
}

std::string to_string(ScreeningLevel level) {
  switch (level) {
    case ScreeningLevel::None: return "none";
    case ScreeningLevel::Watch: return "watch";
    case ScreeningLevel::Alert: return "alert";
  }
  return "none";
}

ConditionalModelSpec normalized(ConditionalModelSpec spec) {
  require_tau(spec.tau);
  if (spec.n_lags < 1) throw ValidationError("conditional spec: n_lags must be >= 1");
  std::sort(spec.covariates.begin(), spec.covariates.end());
  if (std::adjacent_find(spec.covariates.begin(), spec.covariates.end()) != spec.covariates.end()) {
    throw ValidationError("conditional spec: duplicate covariate");
  }
  return spec;
}

int conditional_width(const ConditionalModelSpec& spec, int basis_dim) {
  return basis_dim + spec.n_lags * (spec.time_varying_lag ? basis_dim : 1) +
         static_cast<int>(spec.covariates.size());
}

namespace {

bool needs_height(const ConditionalModelSpec& spec) {
  return std::any_of(spec.covariates.begin(), spec.covariates.end(),
                     [](Covariate c) { return c != Covariate::AgeGap; });
}

// Fills one design row.  `lags` holds prior weights, most recent first.
void fill_row(Eigen::Ref<Eigen::RowVectorXd> row, const ConditionalModelSpec& spec,
              const Vector& basis, std::span<const double> lags, double gap,
              std::optional<double> height) {
  const Eigen::Index dim = basis.size();
  row.head(dim) = basis.transpose();
  Eigen::Index col = dim;
  for (double w : lags) {
    if (spec.time_varying_lag) {
      row.segment(col, dim) = w * basis.transpose();
      col += dim;
    } else {
      row[col++] = w;
    }
  }
  for (Covariate c : spec.covariates) {
    switch (c) {
      case Covariate::HeightLinear: row[col++] = *height; break;
      case Covariate::HeightSquared: row[col++] = *height * *height; break;
      case Covariate::AgeGap: row[col++] = gap; break;
    }
  }
}

}  // namespace

ConditionalDesign build_conditional_design(const Cohort& cohort, const ConditionalModelSpec& raw,
                                           const KnotVector& kv) {
  const ConditionalModelSpec spec = normalized(raw);
  const bool height_needed = needs_height(spec);
  const int width = conditional_width(spec, kv.dimension());

  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> response;
  ConditionalDesign out;
  std::vector<double> lags(spec.n_lags);
  for (const auto& [id, visits] : cohort.subjects) {
    std::vector<std::size_t> weighed;
    for (std::size_t j = 0; j < visits.size(); ++j) {
      if (visits[j].weight) weighed.push_back(j);
    }
    for (std::size_t k = spec.n_lags; k < weighed.size(); ++k) {
      const Measurement& cur = visits[weighed[k]];
      bool in_domain = kv.contains(cur.age);
      for (int l = 1; l <= spec.n_lags && in_domain; ++l) {
        in_domain = kv.contains(visits[weighed[k - l]].age);
      }
      if (!in_domain) continue;
      if (height_needed && !cur.height) {
        throw ValidationError("conditional design: subject " + id + " visit at age " +
                              std::to_string(cur.age) + " lacks the height covariate");
      }
      for (int l = 1; l <= spec.n_lags; ++l) lags[l - 1] = *visits[weighed[k - l]].weight;
      const double gap = cur.age - visits[weighed[k - 1]].age;
      Eigen::RowVectorXd row(width);
      fill_row(row, spec, basis_at(kv, cur.age), lags, gap, cur.height);
      rows.push_back(std::move(row));
      response.push_back(*cur.weight);
      out.provenance.push_back({id, weighed[k]});
    }
  }
  if (rows.empty()) throw ValidationError("conditional design: no eligible rows");
  out.X.resize(static_cast<Eigen::Index>(rows.size()), width);
  for (std::size_t i = 0; i < rows.size(); ++i) out.X.row(static_cast<Eigen::Index>(i)) = rows[i];
  out.y = Eigen::Map<Vector>(response.data(), static_cast<Eigen::Index>(response.size()));
  return out;
}

namespace {

bool has_full_rank(const Matrix& X) {
  Eigen::ColPivHouseholderQR<Matrix> qr(X);
  qr.setThreshold(1e-10);
  return qr.rank() == X.cols();
}

// Grows the design block by block and names the first block that makes the
// column set dependent.
std::string offending_block(const Matrix& X, const ConditionalModelSpec& spec, int dim) {
  struct Block {
    std::string name;
    Eigen::Index width;
  };
  std::vector<Block> blocks{{"age basis", dim}};
  for (int l = 1; l <= spec.n_lags; ++l) {
    blocks.push_back({"lag " + std::to_string(l), spec.time_varying_lag ? dim : 1});
  }
  for (Covariate c : spec.covariates) blocks.push_back({to_string(c), 1});
  Eigen::Index cols = 0;
  for (const auto& b : blocks) {
    cols += b.width;
    if (!has_full_rank(X.leftCols(cols))) return b.name;
  }
  return "unknown";
}

}  // namespace

ConditionalModel fit_conditional(const Cohort& cohort, const ConditionalModelSpec& raw,
                                 const KnotVector& kv, const ConditionalFitOptions& options) {
  const ConditionalModelSpec spec = normalized(raw);
  ConditionalDesign design = build_conditional_design(cohort, spec, kv);
  const auto rows = static_cast<double>(design.X.rows());
  if (rows < options.min_rows_per_column * static_cast<double>(design.X.cols())) {
    throw ValidationError("fit_conditional: " + std::to_string(design.X.rows()) +
                          " rows for " + std::to_string(design.X.cols()) +
                          " columns is below the required ratio");
  }
  if (!has_full_rank(design.X)) {
    throw RankDeficientError("fit_conditional: design is rank deficient at block '" +
                             offending_block(design.X, spec, kv.dimension()) + "'");
  }
  QuantileFit fit = fit_quantile(design.X, design.y, spec.tau);
  return ConditionalModel{spec, kv, std::move(fit.coefficients),
                          static_cast<std::size_t>(design.X.rows())};
}

double predict_conditional(const ConditionalModel& model, double t,
                           std::span<const PriorVisit> prior_path, std::optional<double> height) {
  const auto& spec = model.spec;
  if (!model.kv.contains(t)) {
    throw DomainError("predict_conditional: age " + std::to_string(t) + " outside the model domain");
  }
  if (static_cast<int>(prior_path.size()) != spec.n_lags) {
    throw ValidationError("predict_conditional: prior path has " +
                          std::to_string(prior_path.size()) + " visits, model uses " +
                          std::to_string(spec.n_lags));
  }
  for (std::size_t i = 0; i < prior_path.size(); ++i) {
    if (!(prior_path[i].age < t) || (i > 0 && !(prior_path[i].age > prior_path[i - 1].age))) {
      throw ValidationError("predict_conditional: prior path ages must increase and precede t");
    }
  }
  if (needs_height(spec) && !height) {
    throw ValidationError("predict_conditional: model needs a height");
  }
  std::vector<double> lags(spec.n_lags);
  for (int l = 1; l <= spec.n_lags; ++l) lags[l - 1] = prior_path[prior_path.size() - l].weight;
  const double gap = t - prior_path.back().age;
  Eigen::RowVectorXd row(model.coefficients.size());
  fill_row(row, spec, basis_at(model.kv, t), lags, gap, height);
  return row.dot(model.coefficients);
}

ScreeningFlag screen(const std::map<double, ConditionalModel>& models, double age,
                     double observed_weight, std::span<const PriorVisit> prior_path,
                     std::optional<double> height, ScreeningTaus taus) {
  if (!(taus.watch < taus.alert)) {
    throw ValidationError("screen: watch tau must be below alert tau");
  }
  const auto watch = models.find(taus.watch);
  const auto alert = models.find(taus.alert);
  if (watch == models.end() || alert == models.end()) {
    throw ValidationError("screen: models for tau " + std::to_string(taus.watch) + " and " +
                          std::to_string(taus.alert) + " are required");
  }
  ConditionalModelSpec a = watch->second.spec, b = alert->second.spec;
  a.tau = b.tau = 0.0;
  if (!(a == b) || !(watch->second.kv == alert->second.kv)) {
    throw ValidationError("screen: models must share spec and knots apart from tau");
  }
  ScreeningFlag flag;
  flag.observed = observed_weight;
  const double lo = predict_conditional(watch->second, age, prior_path, height);
  const double hi = predict_conditional(alert->second, age, prior_path, height);
  flag.thresholds[taus.watch] = lo;
  flag.thresholds[taus.alert] = hi;
  if (hi < lo) {
    flag.warning = "conditional quantiles cross: threshold(" + std::to_string(taus.alert) +
                   ") < threshold(" + std::to_string(taus.watch) + ")";
    flag.level = observed_weight > hi ? ScreeningLevel::Alert : ScreeningLevel::None;
    return flag;
  }
  if (observed_weight > hi) {
    flag.level = ScreeningLevel::Alert;
  } else if (observed_weight > lo) {
    flag.level = ScreeningLevel::Watch;
  }
  return flag;
}

}  // namespace centile
