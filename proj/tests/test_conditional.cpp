#include <doctest.h>

#include "centile/conditional.hpp"
#include "centile/errors.hpp"
#include "centile/simulate.hpp"

using namespace centile;

namespace {

Cohort conditional_cohort(int subjects, std::uint64_t seed) {
  GeneratorParams p;
  p.mode = GeneratorMode::Conditional;
  p.n_subjects = subjects;
  p.seed = seed;
  p.lag = 0.6;
  p.height_coef = 0.02;
  return simulate_cohort(p);
}

std::vector<PriorVisit> path_of(const std::vector<Measurement>& visits, std::size_t j, int lags) {
  std::vector<PriorVisit> path;
  for (std::size_t k = j - lags; k < j; ++k) path.push_back({visits[k].age, *visits[k].weight});
  return path;
}

}  // namespace

TEST_CASE("conditional design shape") {
  Cohort c;
  add_measurement(c, {"a", "M", 0.1, 4.0, 52.0});
  add_measurement(c, {"a", "M", 0.4, 6.0, 60.0});
  add_measurement(c, {"a", "M", 0.8, 8.0, 68.0});
  add_measurement(c, {"b", "M", 0.2, 4.5, 55.0});
  add_measurement(c, {"b", "M", 0.6, 7.0, 63.0});
  const KnotVector kv = make_knots(3, 0.0, 1.0, {});

  ConditionalModelSpec spec;
  spec.covariates = {Covariate::HeightLinear};
  const ConditionalDesign one = build_conditional_design(c, spec, kv);
  CHECK(one.X.rows() == 3);
  CHECK(one.provenance[0].subject_id == "a");
  CHECK(one.provenance[0].visit == 1);
  CHECK(one.X(0, 4) == 4.0);   // lag-1 weight
  CHECK(one.X(0, 5) == 60.0);  // current height
  CHECK(one.y[0] == 6.0);

  spec.n_lags = 2;
  const ConditionalDesign two = build_conditional_design(c, spec, kv);
  CHECK(two.X.rows() == 1);
  CHECK(two.provenance[0].subject_id == "a");

  spec.n_lags = 1;
  spec.time_varying_lag = true;
  CHECK(build_conditional_design(c, spec, kv).X.cols() == 4 + 4 + 1);
  CHECK(conditional_width(spec, 4) == 9);

  spec.covariates = {Covariate::AgeGap, Covariate::HeightSquared, Covariate::HeightLinear};
  spec.time_varying_lag = false;
  const ConditionalDesign all = build_conditional_design(c, spec, kv);
  CHECK(all.X(0, 5) == 60.0);
  CHECK(all.X(0, 6) == 3600.0);
  CHECK(all.X(0, 7) == doctest::Approx(0.3));

  add_measurement(c, {"b", "M", 0.9, 9.0, std::nullopt});
  CHECK_THROWS_AS(build_conditional_design(c, spec, kv), ValidationError);
  spec.n_lags = 5;
  CHECK_THROWS_AS(build_conditional_design(c, spec, kv), ValidationError);
  spec.covariates = {Covariate::AgeGap, Covariate::AgeGap};
  CHECK_THROWS_AS(normalized(spec), ValidationError);
}

TEST_CASE("lag coefficient recovery and coverage") {
  const Cohort cohort = conditional_cohort(2000, 41);
  const KnotVector kv = default_infancy_knots();
  for (double tau : {0.5, 0.9}) {
    ConditionalModelSpec spec;
    spec.tau = tau;
    const ConditionalModel model = fit_conditional(cohort, spec, kv);
    CHECK(model.coefficients.size() == kv.dimension() + 2);
    CHECK(std::abs(model.coefficients[kv.dimension()] - 0.6) <= 0.05);

    const ConditionalDesign d = build_conditional_design(cohort, spec, kv);
    const Vector fitted = d.X * model.coefficients;
    const double above = static_cast<double>((d.y.array() > fitted.array() + 1e-9).count());
    CHECK(std::abs(above / static_cast<double>(d.y.size()) - (1.0 - tau)) <= 0.02);
  }
}

TEST_CASE("perfect autoregression is reproduced exactly") {
  Cohort c;
  for (int i = 0; i < 30; ++i) {
    const double w = 4.0 + 0.17 * i;
    for (int j = 0; j < 4; ++j) {
      add_measurement(c, {"s" + std::to_string(i), "M", 0.1 + 0.45 * j + 0.01 * i, w, 60.0});
    }
  }
  ConditionalModelSpec spec;
  spec.covariates = {};
  const KnotVector kv = make_knots(3, 0.0, 2.0, {});
  const ConditionalModel model = fit_conditional(c, spec, kv);
  const ConditionalDesign d = build_conditional_design(c, spec, kv);
  CHECK((d.X * model.coefficients - d.y).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("upper conditional quantiles are ordered at the centroid") {
  const Cohort cohort = conditional_cohort(2000, 43);
  const KnotVector kv = default_infancy_knots();
  ConditionalModelSpec spec;
  spec.tau = 0.9;
  const ConditionalModel m90 = fit_conditional(cohort, spec, kv);
  spec.tau = 0.97;
  const ConditionalModel m97 = fit_conditional(cohort, spec, kv);
  const ConditionalDesign d = build_conditional_design(cohort, spec, kv);
  const Eigen::RowVectorXd centroid = d.X.colwise().mean();
  CHECK(centroid.dot(m97.coefficients) >= centroid.dot(m90.coefficients));
}

TEST_CASE("rank deficiency names the block") {
  Cohort c;
  for (int i = 0; i < 40; ++i) {
    for (int j = 0; j < 4; ++j) {
      // Constant height duplicates the constant already spanned by the basis.
      const double t = 0.1 + 0.4 * j + 0.005 * i;
      add_measurement(c, {"s" + std::to_string(i), "M", t, 5.0 + 0.1 * i + j, 80.0});
    }
  }
  ConditionalModelSpec spec;
  spec.covariates = {Covariate::HeightLinear};
  try {
    fit_conditional(c, spec, make_knots(3, 0.0, 2.0, {}));
    FAIL("expected RankDeficientError");
  } catch (const RankDeficientError& e) {
    CHECK(std::string(e.what()).find("height_linear") != std::string::npos);
  }
  ConditionalFitOptions strict;
  strict.min_rows_per_column = 1000;
  spec.covariates = {};
  CHECK_THROWS_AS(fit_conditional(c, spec, make_knots(3, 0.0, 2.0, {}), strict), ValidationError);
}

TEST_CASE("predict_conditional") {
  ConditionalModelSpec spec = normalized({0.9, 1, {Covariate::HeightLinear}, false});
  const KnotVector kv = default_infancy_knots();
  Vector coef = Vector::Zero(kv.dimension() + 2);
  coef.head(kv.dimension()) = Vector::LinSpaced(kv.dimension(), 3.0, 12.0);
  ConditionalModel model{spec, kv, coef, 0};
  const std::vector<PriorVisit> path{{0.46, 7.1}};
  CHECK(predict_conditional(model, 0.61, path, 66.0) ==
        doctest::Approx(eval_spline(kv, coef.head(kv.dimension()), 0.61)).epsilon(1e-14));

  model.coefficients[kv.dimension()] = 0.7;
  model.coefficients[kv.dimension() + 1] = 0.02;
  const std::vector<PriorVisit> heavier{{0.46, 8.1}};
  CHECK(predict_conditional(model, 0.61, heavier, 66.0) - predict_conditional(model, 0.61, path, 66.0) ==
        doctest::Approx(0.7).epsilon(1e-12));

  CHECK_THROWS_AS(predict_conditional(model, 2.5, path, 66.0), DomainError);
  CHECK_THROWS_AS(predict_conditional(model, 0.4, path, 66.0), ValidationError);
  CHECK_THROWS_AS(predict_conditional(model, 0.61, std::vector<PriorVisit>{}, 66.0), ValidationError);
  CHECK_THROWS_AS(predict_conditional(model, 0.61, path, std::nullopt), ValidationError);
}

TEST_CASE("counterfactual monotonicity and unit equivariance") {
  const Cohort cohort = conditional_cohort(600, 5);
  const KnotVector kv = default_infancy_knots();
  ConditionalModelSpec spec;
  spec.tau = 0.9;
  spec.n_lags = 2;
  spec.covariates = {Covariate::HeightLinear, Covariate::AgeGap};
  const ConditionalModel model = fit_conditional(cohort, spec, kv);
  const Eigen::Index lag1 = kv.dimension();
  REQUIRE(model.coefficients[lag1] > 0.0);
  double previous = -1e300;
  for (double w = 5.0; w <= 9.0; w += 0.25) {
    const std::vector<PriorVisit> path{{0.2, 5.5}, {0.45, w}};
    const double pred = predict_conditional(model, 0.6, path, 65.0);
    CHECK(pred >= previous);
    previous = pred;
  }

  Cohort grams;
  for (const auto& [id, visits] : cohort.subjects) {
    for (Measurement m : visits) {
      m.weight = *m.weight * 1000.0;
      add_measurement(grams, m);
    }
  }
  const ConditionalModel scaled = fit_conditional(grams, spec, kv);
  CHECK(scaled.coefficients[lag1] == doctest::Approx(model.coefficients[lag1]).epsilon(1e-9));
  for (double t : {0.4, 0.9, 1.7}) {
    const std::vector<PriorVisit> kg{{t - 0.3, 6.0}, {t - 0.1, 7.0}};
    const std::vector<PriorVisit> g{{t - 0.3, 6000.0}, {t - 0.1, 7000.0}};
    CHECK(predict_conditional(scaled, t, g, 70.0) ==
          doctest::Approx(1000.0 * predict_conditional(model, t, kg, 70.0)).epsilon(1e-9));
  }
}

TEST_CASE("screen levels") {
  const KnotVector kv = make_knots(3, 0.0, 2.0, {});
  auto make = [&](double tau, double level) {
    Vector coef = Vector::Zero(kv.dimension() + 1);
    coef.head(kv.dimension()).setConstant(level);
    return ConditionalModel{normalized({tau, 1, {}, false}), kv, coef, 0};
  };
  std::map<double, ConditionalModel> models{{0.90, make(0.90, 9.07)}, {0.97, make(0.97, 9.41)}};
  const std::vector<PriorVisit> path{{0.46, 7.5}};
  CHECK(screen(models, 0.61, 8.8, path, std::nullopt).level == ScreeningLevel::None);
  const ScreeningFlag watch = screen(models, 0.61, 9.2, path, std::nullopt);
  CHECK(watch.level == ScreeningLevel::Watch);
  CHECK(watch.thresholds.at(0.90) == doctest::Approx(9.07));
  CHECK(watch.thresholds.at(0.97) == doctest::Approx(9.41));
  CHECK_FALSE(watch.warning.has_value());
  CHECK(screen(models, 0.61, 9.6, path, std::nullopt).level == ScreeningLevel::Alert);

  std::map<double, ConditionalModel> crossed{{0.90, make(0.90, 9.5)}, {0.97, make(0.97, 9.3)}};
  const ScreeningFlag flag = screen(crossed, 0.61, 9.4, path, std::nullopt);
  CHECK(flag.warning.has_value());
  CHECK(flag.level == ScreeningLevel::Alert);
  CHECK(screen(crossed, 0.61, 9.2, path, std::nullopt).level == ScreeningLevel::None);

  std::map<double, ConditionalModel> missing{{0.90, make(0.90, 9.0)}};
  CHECK_THROWS_AS(screen(missing, 0.61, 9.0, path, std::nullopt), ValidationError);
}
