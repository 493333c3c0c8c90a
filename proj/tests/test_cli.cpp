#include <doctest.h>

#include <cstdlib>
#include <regex>

#include "centile/charts.hpp"
#include "centile/cohort.hpp"
#include "centile/conditional.hpp"
#include "centile/model_io.hpp"
#include "centile/reference.hpp"
#include "cli_support.hpp"
#include "export.hpp"

using namespace centile;
using namespace centile::testing;

namespace {

// Leaves CENTILE_CONFIG unset for the duration of a test.
struct EnvGuard {
  EnvGuard() { ::unsetenv("CENTILE_CONFIG"); }
  ~EnvGuard() { ::unsetenv("CENTILE_CONFIG"); }
};

}  // namespace

TEST_CASE("cli usage errors exit 2") {
  EnvGuard env;
  CHECK(run_cli({}).code == cli::kExitUsage);
  const auto bogus = run_cli({"bogus"});
  CHECK(bogus.code == cli::kExitUsage);
  CHECK(bogus.err.find("unknown subcommand 'bogus'") != std::string::npos);
  CHECK(bogus.err.find("Usage:") != std::string::npos);
  CHECK(run_cli({"percentile", "--chart", "x", "--age", "1"}).code == cli::kExitUsage);
  CHECK(run_cli({"percentile", "--chart", "x", "--age", "1", "--value", "2", "--frobnicate"}).code ==
        cli::kExitUsage);
  CHECK(run_cli({"percentile", "--chart", "x", "--age", "one", "--value", "2"}).code == cli::kExitUsage);
  CHECK(run_cli({"export", "--model", "m", "--format", "png"}).code == cli::kExitUsage);
  CHECK(run_cli({"--help"}).code == cli::kExitOk);
}

TEST_CASE("cli validation errors exit 1") {
  EnvGuard env;
  TempDir dir("cli-val");
  CHECK(run_cli({"percentile", "--chart", dir.file("missing.model"), "--age", "1", "--value", "2"}).code ==
        cli::kExitValidation);
  spit(dir.file("bad.csv"), "id,age\n1,2\n");
  CHECK(run_cli({"fit-marginal", "--cohort", dir.file("bad.csv"), "--out", dir.file("m")}).code ==
        cli::kExitValidation);
  spit(dir.file("bad.json"), "{\"taus\": [0.5, 0.1]}");
  const auto r = run_cli({"--config", dir.file("bad.json"), "percentile", "--chart", "x", "--age", "1", "--value", "2"});
  CHECK(r.code == cli::kExitValidation);
  spit(dir.file("unknown.json"), "{\"tau_grid\": [0.5]}");
  CHECK(run_cli({"--config", dir.file("unknown.json"), "simulate", "--out", dir.file("c.csv")}).code ==
        cli::kExitValidation);
  // No seed anywhere.
  CHECK(run_cli({"simulate", "--out", dir.file("c.csv")}).code == cli::kExitValidation);
}

TEST_CASE("cli marginal pipeline") {
  EnvGuard env;
  TempDir dir("cli-marg");
  const auto sim = run_cli({"simulate", "--mode", "marginal", "--seed", "7", "--subjects", "200", "--out",
                            dir.file("c.csv")});
  REQUIRE(sim.code == 0);
  const auto fit = run_cli({"fit-marginal", "--cohort", dir.file("c.csv"), "--out", dir.file("chart.model"),
                            "--repair-grid", "101"});
  REQUIRE(fit.code == 0);
  const MarginalChart chart = load_chart_file(dir.file("chart.model"));
  CHECK(chart.taus == default_taus());
  CHECK(chart.repaired.has_value());

  const auto pct = run_cli({"percentile", "--chart", dir.file("chart.model"), "--age", "0.37", "--value", "5.2"});
  REQUIRE(pct.code == 0);
  CHECK(pct.out == percentile_of(chart, 0.37, 5.2).to_string() + "\n");

  const auto table = run_cli({"export", "--model", dir.file("chart.model"), "--grid", "37"});
  REQUIRE(table.code == 0);
  const cli::Table parsed = cli::parse_table(table.out);
  const auto ages = age_grid(chart.kv, 37);
  REQUIRE(parsed.rows.size() == ages.size());
  REQUIRE(parsed.header.size() == chart.taus.size() + 1);
  for (std::size_t a = 0; a < ages.size(); ++a) {
    CHECK(parsed.rows[a][0] == ages[a]);
    for (std::size_t k = 0; k < chart.taus.size(); ++k) {
      CHECK(parsed.rows[a][k + 1] == eval_quantile(chart, ages[a], chart.taus[k]));
    }
  }

  const auto svg = run_cli({"export", "--model", dir.file("chart.model"), "--format", "svg", "--out",
                            dir.file("chart.svg")});
  REQUIRE(svg.code == 0);
  const std::string doc = slurp(dir.file("chart.svg"));
  CHECK(doc.rfind("<svg", 0) == 0);
  CHECK(doc.find("viewBox=\"0 0 800 500\"") != std::string::npos);
  const std::regex polyline("<polyline ");
  CHECK(std::distance(std::sregex_iterator(doc.begin(), doc.end(), polyline), std::sregex_iterator()) ==
        static_cast<long>(chart.taus.size()));
}

TEST_CASE("cli config precedence") {
  EnvGuard env;
  TempDir dir("cli-cfg");
  spit(dir.file("env.json"), "{\"seed\": 11, \"taus\": [0.25, 0.5, 0.75]}");
  spit(dir.file("flag.json"), "{\"seed\": 12, \"taus\": [0.1, 0.9], \"output_dir\": \"" + dir.file("out") + "\"}");
  ::setenv("CENTILE_CONFIG", dir.file("env.json").c_str(), 1);

  REQUIRE(run_cli({"simulate", "--subjects", "120", "--out", dir.file("c.csv")}).code == 0);
  REQUIRE(run_cli({"fit-marginal", "--cohort", dir.file("c.csv"), "--out", dir.file("a.model")}).code == 0);
  CHECK(load_chart_file(dir.file("a.model")).taus == std::vector<double>{0.25, 0.5, 0.75});

  REQUIRE(run_cli({"fit-marginal", "--cohort", dir.file("c.csv"), "--out", dir.file("b.model"), "--taus",
                   "0.2,0.8"})
              .code == 0);
  CHECK(load_chart_file(dir.file("b.model")).taus == std::vector<double>{0.2, 0.8});

  // An explicit --config replaces the environment default; output_dir applies to relative paths.
  REQUIRE(run_cli({"--config", dir.file("flag.json"), "fit-marginal", "--cohort", dir.file("c.csv"), "--out",
                   "c.model"})
              .code == 0);
  CHECK(load_chart_file(dir.file("out/c.model")).taus == std::vector<double>{0.1, 0.9});

  // Seeds: config default, then flag.
  REQUIRE(run_cli({"simulate", "--subjects", "50", "--out", dir.file("s11.csv")}).code == 0);
  REQUIRE(run_cli({"simulate", "--subjects", "50", "--seed", "11", "--out", dir.file("f11.csv")}).code == 0);
  REQUIRE(run_cli({"simulate", "--subjects", "50", "--seed", "13", "--out", dir.file("f13.csv")}).code == 0);
  CHECK(slurp(dir.file("s11.csv")) == slurp(dir.file("f11.csv")));
  CHECK(slurp(dir.file("s11.csv")) != slurp(dir.file("f13.csv")));

  // Knot flags override individual fields of the configured knots.
  REQUIRE(run_cli({"fit-marginal", "--cohort", dir.file("c.csv"), "--out", dir.file("k.model"), "--degree", "2",
                   "--interior", "0.5,1"})
              .code == 0);
  const MarginalChart k = load_chart_file(dir.file("k.model"));
  CHECK(k.kv.degree() == 2);
  CHECK(k.kv.interior() == std::vector<double>{0.5, 1.0});
  CHECK(k.kv.t_max() == 2.0);
}

TEST_CASE("cli conditional, screening and reference delegation") {
  EnvGuard env;
  TempDir dir("cli-cond");
  REQUIRE(run_cli({"simulate", "--mode", "conditional", "--seed", "3", "--subjects", "400", "--out",
                   dir.file("c.csv")})
              .code == 0);
  REQUIRE(run_cli({"fit-conditional", "--cohort", dir.file("c.csv"), "--tau", "0.9", "--out", dir.file("m90")})
              .code == 0);
  REQUIRE(run_cli({"fit-conditional", "--cohort", dir.file("c.csv"), "--tau", "0.97", "--out", dir.file("m97")})
              .code == 0);
  const ConditionalModel m90 = load_conditional_file(dir.file("m90"));
  const ConditionalModel m97 = load_conditional_file(dir.file("m97"));

  const auto pred = run_cli({"predict", "--model", dir.file("m90"), "--age", "1", "--prior", "0.75:8.1",
                             "--height", "74"});
  REQUIRE(pred.code == 0);
  const std::vector<PriorVisit> prior{{0.75, 8.1}};
  CHECK(pred.out == format_double(predict_conditional(m90, 1.0, prior, 74.0)) + "\n");
  CHECK(run_cli({"predict", "--model", dir.file("m90"), "--age", "1", "--prior", "0.75-8.1"}).code ==
        cli::kExitValidation);

  const Cohort cohort = load_cohort_file(dir.file("c.csv")).cohort;
  const auto& visits = cohort.subjects.at("S001");
  const Measurement& last = visits.back();
  const Measurement& before = visits[visits.size() - 2];
  const std::map<double, ConditionalModel> models{{0.9, m90}, {0.97, m97}};
  const std::vector<PriorVisit> path{{before.age, *before.weight}};
  const ScreeningFlag flag = screen(models, last.age, *last.weight, path, last.height);
  const auto sc = run_cli({"screen", "--m90", dir.file("m90"), "--m97", dir.file("m97"), "--cohort",
                           dir.file("c.csv"), "--subject", "S001"});
  REQUIRE(sc.code == 0);
  CHECK(sc.out.find("level: " + to_string(flag.level) + "\n") != std::string::npos);
  CHECK(sc.out.find("threshold 0.9: " + format_double(flag.thresholds.at(0.9))) != std::string::npos);
  // Models swapped: taus do not match the screening thresholds.
  CHECK(run_cli({"screen", "--m90", dir.file("m97"), "--m97", dir.file("m90"), "--cohort", dir.file("c.csv"),
                 "--subject", "S001"})
            .code == cli::kExitValidation);

  ReferenceCriteria crit;
  crit.anchor_age = visits[1].age;
  crit.target_age = visits[3].age;
  crit.age_window = 0.2;
  crit.weight_window = 0.6;
  crit.target_window = 0.2;
  const PeerSet set = select_peers(cohort, "S001", crit);
  const auto rg = run_cli({"refgroup", "--cohort", dir.file("c.csv"), "--subject", "S001", "--anchor-age",
                           format_double(crit.anchor_age), "--target-age", format_double(crit.target_age),
                           "--age-window", "0.2", "--weight-window", "0.6", "--target-window", "0.2"});
  REQUIRE(rg.code == 0);
  CHECK(rg.out.rfind("peers: " + std::to_string(set.peers.size()) + "\n", 0) == 0);
  CHECK(run_cli({"refgroup", "--cohort", dir.file("c.csv"), "--subject", "nobody", "--anchor-age", "0.5",
                 "--target-age", "1"})
            .code == cli::kExitValidation);
}
