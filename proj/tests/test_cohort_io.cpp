#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "centile/charts.hpp"
#include "centile/cohort.hpp"
#include "centile/errors.hpp"
#include "centile/model_io.hpp"
#include "centile/simulate.hpp"

using namespace centile;

TEST_CASE("load_cohort skips invalid rows with reasons") {
  std::istringstream in(
      "subject_id,stratum,age_years,weight_kg,height_cm\n"
      "a,M,0.10,3.9,52.0\n"
      "a,M,0.30,abc,58.1\n"
      "b,M,0.20,4.4,\n"
      "b,M,0.25,,57.0\n");
  const LoadedCohort loaded = load_cohort(in);
  CHECK(loaded.cohort.measurement_count() == 3);
  REQUIRE(loaded.report.skipped.size() == 1);
  CHECK(loaded.report.skipped[0].line == 3);
  CHECK(loaded.report.skipped[0].reason == "non-numeric weight_kg");
  const auto& b = loaded.cohort.subjects.at("b");
  CHECK(b[0].weight == 4.4);
  CHECK_FALSE(b[0].height.has_value());
  CHECK_FALSE(b[1].weight.has_value());
}

TEST_CASE("load_cohort rejects duplicates, negative ages and bad headers") {
  std::istringstream in(
      "subject_id,stratum,age_years,weight_kg,height_cm\n"
      "a,M,0.5,7.0,66\n"
      "a,M,0.5,7.1,66\n"
      "a,M,-0.1,3.0,50\n"
      "a,M,0.7,,\n");
  const LoadedCohort loaded = load_cohort(in);
  CHECK(loaded.cohort.measurement_count() == 1);
  REQUIRE(loaded.report.skipped.size() == 3);
  CHECK(loaded.report.skipped[0].reason == "duplicate visit");
  CHECK(loaded.report.skipped[1].reason == "negative age");
  CHECK(loaded.report.skipped[2].reason == "neither weight nor height present");

  std::istringstream header_only("subject_id,stratum,age_years,weight_kg,height_cm\n");
  const LoadedCohort empty = load_cohort(header_only);
  CHECK(empty.cohort.subjects.empty());
  CHECK(empty.report.skipped.empty());

  std::istringstream bad("id,age,weight\n1,2,3\n");
  CHECK_THROWS_AS(load_cohort(bad), ValidationError);
  std::istringstream nothing("");
  CHECK_THROWS_AS(load_cohort(nothing), ValidationError);
}

TEST_CASE("ingestion is order-insensitive and CSV output reloads exactly") {
  GeneratorParams p;
  p.n_subjects = 40;
  p.seed = 17;
  const Cohort cohort = simulate_cohort(p);
  std::ostringstream out;
  write_cohort(out, cohort);

  std::istringstream lines_in(out.str());
  std::string header, line;
  std::getline(lines_in, header);
  std::vector<std::string> rows;
  while (std::getline(lines_in, line)) rows.push_back(line);
  std::mt19937_64 gen(4);
  std::shuffle(rows.begin(), rows.end(), gen);
  std::string shuffled = header + "\n";
  for (const auto& r : rows) shuffled += r + "\n";

  std::istringstream a(out.str()), b(shuffled);
  const Cohort direct = load_cohort(a).cohort;
  CHECK(direct == cohort);
  CHECK(load_cohort(b).cohort == cohort);
}

TEST_CASE("simulate_cohort determinism and zero-noise behaviour") {
  GeneratorParams p;
  p.n_subjects = 25;
  p.seed = 7;
  CHECK(simulate_cohort(p) == simulate_cohort(p));
  GeneratorParams other = p;
  other.seed = 8;
  CHECK_FALSE(simulate_cohort(other) == simulate_cohort(p));

  p.scale.coef = {0.0};
  for (const auto& [id, visits] : simulate_cohort(p).subjects) {
    for (const auto& m : visits) CHECK(*m.weight == p.median(m.age));
  }
}

TEST_CASE("catch-up generator follows the rate equation one step") {
  GeneratorParams p;
  p.mode = GeneratorMode::Catchup;
  p.n_subjects = 5;
  p.seed = 3;
  p.b_constant = -0.5;
  p.rate_noise_sd = 0.0;
  p.schedule.ages = {0.2, 0.3};
  for (const auto& [id, v] : simulate_cohort(p).subjects) {
    const double dev = *v[0].weight - p.median(0.2);
    const double median_increment = p.median(0.3) - p.median(0.2);
    // dW = median increment + b * deviation * D; for deviation -1 this is +0.05 kg.
    CHECK(*v[1].weight - *v[0].weight ==
          doctest::Approx(median_increment + (-0.5) * dev * (0.3 - 0.2)).epsilon(1e-12));
  }
}

TEST_CASE("marginal generator quantiles converge to mu + sigma * z") {
  GeneratorParams p;
  p.n_subjects = 50000;
  p.seed = 12;
  p.schedule.ages = {1.0};
  const Cohort cohort = simulate_cohort(p);
  std::vector<double> w;
  for (const auto& [id, v] : cohort.subjects) w.push_back(*v[0].weight);
  std::sort(w.begin(), w.end());
  const double mu = p.median(1.0), sigma = p.scale(1.0);
  const double n = static_cast<double>(w.size());
  // Standard normal quantiles at 0.1, 0.5, 0.9.
  const std::pair<double, double> cases[] = {{0.1, -1.2815515655446004}, {0.5, 0.0}, {0.9, 1.2815515655446004}};
  for (auto [tau, z] : cases) {
    const double empirical = w[static_cast<std::size_t>(std::ceil(n * tau)) - 1];
    const double density = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI) / sigma;
    const double se = std::sqrt(tau * (1.0 - tau) / n) / density;
    CHECK(std::abs(empirical - (mu + sigma * z)) <= 3.0 * se);
  }
}

TEST_CASE("generator params JSON") {
  CHECK_THROWS_AS(generator_params_from_json("{\"mode\":\"marginal\"}"), ValidationError);
  CHECK_THROWS_AS(generator_params_from_json("{\"seed\":1,\"bogus\":2}"), ValidationError);
  CHECK_THROWS_AS(generator_params_from_json("{\"seed\":1,\"n_subjects\":0}"), ValidationError);
  GeneratorParams p;
  p.mode = GeneratorMode::Conditional;
  p.seed = 99;
  p.schedule.ages = {0.1, 0.5, 0.9};
  p.schedule.jitter = 0.05;
  const GeneratorParams back = generator_params_from_json(generator_params_to_json(p));
  CHECK(simulate_cohort(back) == simulate_cohort(p));
  GeneratorParams bad = p;
  bad.schedule.ages = {0.5, 0.2};
  CHECK_THROWS_AS(simulate_cohort(bad), ValidationError);
}

namespace {

MarginalChart small_chart() {
  GeneratorParams p;
  p.n_subjects = 150;
  p.seed = 5;
  const Cohort c = simulate_cohort(p);
  const std::vector<double> taus{0.1, 0.5, 0.9};
  return fit_marginal(c, MeasurementKind::Weight, "M", default_infancy_knots(), taus).chart;
}

}  // namespace

TEST_CASE("model files round-trip exactly") {
  const MarginalChart chart = with_repaired_grid(small_chart(), age_grid(0.0, 2.0, 11));
  std::stringstream buf;
  save_model(buf, chart);
  const MarginalChart back = as_chart(load_model(buf));
  CHECK(back.coef == chart.coef);
  CHECK(back.taus == chart.taus);
  CHECK(back.kv == chart.kv);
  CHECK(back.repaired == chart.repaired);
  CHECK(back.fitted_n == chart.fitted_n);
  for (double t : age_grid(0.0, 2.0, 100)) {
    for (double tau : {0.1, 0.3, 0.5, 0.9}) CHECK(eval_quantile(back, t, tau) == eval_quantile(chart, t, tau));
  }

  ConditionalModel cm{normalized({0.9, 2, {Covariate::AgeGap, Covariate::HeightLinear}, true}),
                      default_infancy_knots(), Vector::LinSpaced(8 + 16 + 2, -1.0 / 3.0, 2.0 / 7.0), 123};
  const ConditionalModel cm_back = as_conditional(model_from_json(model_to_json(cm)));
  CHECK(cm_back.spec == cm.spec);
  CHECK(cm_back.coefficients == cm.coefficients);
  CHECK(cm_back.training_rows == 123);

  CatchupModel cu{make_knots(3, 0.0, 2.0, {0.5}), Vector::Constant(5, 0.1 / 3.0), true, "w.model",
                  Vector::LinSpaced(7, -0.1, 0.7)};
  const CatchupModel cu_back = as_catchup(model_from_json(model_to_json(cu)));
  CHECK(cu_back.coefficients == cu.coefficients);
  CHECK(cu_back.residuals == cu.residuals);
  CHECK(cu_back.use_zscores);
  CHECK(cu_back.reference_chart == "w.model");
}

TEST_CASE("malformed model files") {
  const std::string text = model_to_json(small_chart());
  CHECK_THROWS_AS(model_from_json(text.substr(0, text.size() / 2)), SchemaError);
  CHECK_THROWS_AS(model_from_json("{\"scheme\":\"chart-v9\"}"), SchemaError);

  ConditionalModel cm{normalized({0.5, 1, {}, false}), make_knots(3, 0.0, 1.0, {}),
                      Vector::Zero(5), 10};
  CHECK_THROWS_AS(as_chart(model_from_json(model_to_json(cm))), ModelTypeError);

  std::string broken = text;
  const auto pos = broken.find("\"fitted_n\"");
  broken.replace(pos, 10, "\"fitted_x\"");
  try {
    model_from_json(broken);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("$.fitted_n") != std::string::npos);
  }
}
