#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "centile/catchup.hpp"
#include "centile/charts.hpp"
#include "centile/cohort.hpp"
#include "centile/conditional.hpp"
#include "centile/errors.hpp"
#include "centile/model_io.hpp"
#include "centile/reference.hpp"
#include "centile/simulate.hpp"
#include "export.hpp"
#include "run_config.hpp"

namespace centile::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct KnotFlags {
  int degree = 3;
  std::vector<double> interior;
  double age_min = 0.0;
  double age_max = 0.0;
  CLI::Option* degree_opt = nullptr;
  CLI::Option* interior_opt = nullptr;
  CLI::Option* min_opt = nullptr;
  CLI::Option* max_opt = nullptr;

  void attach(CLI::App* cmd) {
    degree_opt = cmd->add_option("--degree", degree, "Spline degree");
    interior_opt = cmd->add_option("--interior", interior, "Interior knots, comma separated")->delimiter(',');
    min_opt = cmd->add_option("--age-min", age_min, "Lower end of the knot domain (years)");
    max_opt = cmd->add_option("--age-max", age_max, "Upper end of the knot domain (years)");
  }

  KnotVector apply(const KnotVector& base) const {
    return make_knots(degree_opt->count() ? degree : base.degree(), min_opt->count() ? age_min : base.t_min(),
                      max_opt->count() ? age_max : base.t_max(),
                      interior_opt->count() ? interior : base.interior());
  }
};

std::string resolve_out(const RunConfig& config, const std::string& path) {
  fs::path p(path);
  if (!config.output_dir.empty() && p.is_relative()) p = fs::path(config.output_dir) / p;
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  return p.string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << text;
  if (!out) throw ValidationError("write failed for " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Cohort load_reported(const std::string& path, std::ostream& err) {
  LoadedCohort loaded = load_cohort_file(path);
  for (const auto& s : loaded.report.skipped) {
    err << "warning: " << path << ":" << s.line << ": skipped (" << s.reason << ")\n";
  }
  return std::move(loaded.cohort);
}

// "0.25:6.1,0.5:7.4" -> prior visits, oldest first.
std::vector<PriorVisit> parse_prior(const std::string& text) {
  std::vector<PriorVisit> path;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ValidationError("prior visit '" + item + "' is not age:weight");
    const auto age = parse_double(item.substr(0, colon));
    const auto weight = parse_double(item.substr(colon + 1));
    if (!age || !weight) throw ValidationError("prior visit '" + item + "' is not age:weight");
    path.push_back({*age, *weight});
  }
  return path;
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

const Measurement& find_visit(const std::vector<Measurement>& visits, std::optional<double> age,
                              const std::string& subject) {
  if (!age) {
    for (auto it = visits.rbegin(); it != visits.rend(); ++it) {
      if (it->weight) return *it;
    }
    throw ValidationError("subject " + subject + " has no weighed visit");
  }
  for (const auto& m : visits) {
    if (m.age == *age) {
      if (!m.weight) throw ValidationError("subject " + subject + " has no weight at age " + format_double(*age));
      return m;
    }
  }
  throw ValidationError("subject " + subject + " has no visit at age " + format_double(*age));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Longitudinal growth charts by spline quantile regression", "centile"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "JSON run configuration (default: $CENTILE_CONFIG)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic cohort CSV");
  std::string sim_mode, sim_params, sim_out;
  std::uint64_t sim_seed = 0;
  int sim_subjects = 0;
  auto* sim_mode_opt = sim->add_option("--mode", sim_mode, "marginal, catchup or conditional");
  auto* sim_seed_opt = sim->add_option("--seed", sim_seed, "Random seed");
  auto* sim_subjects_opt = sim->add_option("--subjects", sim_subjects, "Number of subjects");
  sim->add_option("--params", sim_params, "Generator parameters (JSON)");
  sim->add_option("--out", sim_out, "Output cohort CSV")->required();

  // fit-marginal
  auto* fm = app.add_subcommand("fit-marginal", "Fit marginal quantile curves");
  std::string fm_cohort, fm_out, fm_kind = "weight", fm_stratum;
  std::vector<double> fm_taus;
  std::size_t fm_repair = 0;
  KnotFlags fm_knots;
  fm->add_option("--cohort", fm_cohort, "Cohort CSV")->required();
  fm->add_option("--out", fm_out, "Output model file")->required();
  fm->add_option("--kind", fm_kind, "weight or height");
  fm->add_option("--stratum", fm_stratum, "Stratum to fit (default: pool all)");
  auto* fm_taus_opt = fm->add_option("--taus", fm_taus, "Quantile levels, comma separated")->delimiter(',');
  fm->add_option("--repair-grid", fm_repair, "Store a rearranged grid with this many ages (0: none)");
  fm_knots.attach(fm);

  // fit-conditional
  auto* fc = app.add_subcommand("fit-conditional", "Fit a conditional quantile model");
  std::string fc_cohort, fc_out, fc_stratum;
  double fc_tau = 0.5;
  int fc_lags = 1;
  std::vector<std::string> fc_covariates;
  bool fc_no_covariates = false, fc_tv = false;
  KnotFlags fc_knots;
  fc->add_option("--cohort", fc_cohort, "Cohort CSV")->required();
  fc->add_option("--out", fc_out, "Output model file")->required();
  fc->add_option("--stratum", fc_stratum, "Restrict to one stratum");
  auto* fc_tau_opt = fc->add_option("--tau", fc_tau, "Quantile level");
  auto* fc_lags_opt = fc->add_option("--lags", fc_lags, "Number of prior weights");
  auto* fc_cov_opt =
      fc->add_option("--covariates", fc_covariates, "height_linear, height_squared, age_gap")->delimiter(',');
  auto* fc_nocov_opt = fc->add_flag("--no-covariates", fc_no_covariates, "Fit without covariates");
  auto* fc_tv_opt = fc->add_flag("--time-varying-lag", fc_tv, "Expand the lag coefficients in the age basis");
  fc_knots.attach(fc);

  // fit-catchup
  auto* fcu = app.add_subcommand("fit-catchup", "Fit the catch-up coefficient b(t)");
  std::string fcu_cohort, fcu_chart, fcu_out;
  bool fcu_z = false;
  double fcu_min_gap = 0.01;
  KnotFlags fcu_knots;
  fcu->add_option("--cohort", fcu_cohort, "Cohort CSV")->required();
  fcu->add_option("--chart", fcu_chart, "Marginal weight chart model")->required();
  fcu->add_option("--out", fcu_out, "Output model file")->required();
  fcu->add_flag("--zscores", fcu_z, "Use chart z-scores instead of weights");
  fcu->add_option("--min-gap", fcu_min_gap, "Skip visit pairs closer than this (years)");
  fcu_knots.attach(fcu);

  // percentile
  auto* pc = app.add_subcommand("percentile", "Percentile of a measurement on a chart");
  std::string pc_chart;
  double pc_age = 0.0, pc_value = 0.0;
  pc->add_option("--chart", pc_chart, "Marginal chart model")->required();
  pc->add_option("--age", pc_age, "Age (years)")->required();
  pc->add_option("--value", pc_value, "Measurement")->required();

  // predict
  auto* pr = app.add_subcommand("predict", "Conditional quantile for a prior growth path");
  std::string pr_model, pr_prior;
  double pr_age = 0.0, pr_height = 0.0;
  pr->add_option("--model", pr_model, "Conditional model")->required();
  pr->add_option("--age", pr_age, "Age of the predicted visit (years)")->required();
  pr->add_option("--prior", pr_prior, "Prior visits as age:weight pairs, oldest first")->required();
  auto* pr_height_opt = pr->add_option("--height", pr_height, "Height at the predicted visit (cm)");

  // screen
  auto* sc = app.add_subcommand("screen", "Screen a visit against two conditional models");
  std::string sc_m90, sc_m97, sc_cohort, sc_subject;
  double sc_age = 0.0;
  sc->add_option("--m90", sc_m90, "Model at the watch level")->required();
  sc->add_option("--m97", sc_m97, "Model at the alert level")->required();
  sc->add_option("--cohort", sc_cohort, "Cohort CSV holding the subject's visits")->required();
  sc->add_option("--subject", sc_subject, "Subject id")->required();
  auto* sc_age_opt = sc->add_option("--age", sc_age, "Visit to screen (default: latest weighed visit)");

  // refgroup
  auto* rg = app.add_subcommand("refgroup", "Empirical percentile within a matched peer group");
  std::string rg_cohort, rg_subject;
  double rg_anchor = 0.0, rg_target = 0.0, rg_aw = 0.0, rg_ww = 0.0, rg_tw = 0.0;
  rg->add_option("--cohort", rg_cohort, "Cohort CSV")->required();
  rg->add_option("--subject", rg_subject, "Probe subject id")->required();
  rg->add_option("--anchor-age", rg_anchor, "Anchor age (years)")->required();
  rg->add_option("--target-age", rg_target, "Target age (years)")->required();
  auto* rg_aw_opt = rg->add_option("--age-window", rg_aw, "Anchor age half-width (years)");
  auto* rg_ww_opt = rg->add_option("--weight-window", rg_ww, "Anchor weight half-width (kg)");
  auto* rg_tw_opt = rg->add_option("--target-window", rg_tw, "Target age half-width (years)");

  // export
  auto* ex = app.add_subcommand("export", "Export chart or b(t) curves as a table or SVG");
  std::string ex_model, ex_format = "table", ex_out;
  std::size_t ex_grid = 101;
  ex->add_option("--model", ex_model, "Marginal chart or catch-up model")->required();
  ex->add_option("--format", ex_format, "table or svg")->check(CLI::IsMember({"table", "svg"}));
  ex->add_option("--grid", ex_grid, "Number of grid ages")->check(CLI::Range(std::size_t{2}, std::size_t{100000}));
  ex->add_option("--out", ex_out, "Output file (default: stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.back()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    const auto subs = app.get_subcommands();
    std::string message = e.what();
    if (subs.empty()) {
      for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
          ++i;
        } else if (!args[i].empty() && args[i][0] != '-') {
          if (app.get_subcommand_no_throw(args[i]) == nullptr) message = "unknown subcommand '" + args[i] + "'";
          break;
        }
      }
    }
    err << "error: " << message << "\n\n";
    err << (subs.empty() ? app.help() : subs.back()->help());
    return kExitUsage;
  }

  try {
    RunConfig config = default_run_config();
    if (config_path.empty()) {
      if (const char* env = std::getenv("CENTILE_CONFIG"); env && *env) config_path = env;
    }
    if (!config_path.empty()) config = load_run_config_file(config_path);

    if (app.got_subcommand(sim)) {
      json params = config.generator;
      if (!sim_params.empty()) {
        json file;
        try {
          file = json::parse(read_text(sim_params));
        } catch (const json::parse_error& e) {
          throw ValidationError(std::string("generator params: ") + e.what());
        }
        if (!file.is_object()) throw ValidationError("generator params: expected a JSON object");
        for (const auto& [key, value] : file.items()) params[key] = value;
      }
      if (!params.contains("seed") && config.seed) params["seed"] = *config.seed;
      if (sim_seed_opt->count()) params["seed"] = sim_seed;
      if (sim_mode_opt->count()) params["mode"] = sim_mode;
      if (sim_subjects_opt->count()) params["n_subjects"] = sim_subjects;
      const GeneratorParams gp = generator_params_from_json(params.dump());
      const Cohort cohort = simulate_cohort(gp);
      const std::string path = resolve_out(config, sim_out);
      write_cohort_file(path, cohort);
      out << "wrote " << path << ": " << cohort.subjects.size() << " subjects, " << cohort.measurement_count()
          << " visits (" << to_string(gp.mode) << ", seed " << gp.seed << ")\n";
      return kExitOk;
    }

    if (app.got_subcommand(fm)) {
      const Cohort cohort = load_reported(fm_cohort, err);
      const KnotVector kv = fm_knots.apply(config.marginal_knots);
      const std::vector<double> taus = fm_taus_opt->count() ? fm_taus : config.taus;
      const MeasurementKind kind = parse_measurement_kind(fm_kind);
      MarginalFit fit = fit_marginal(cohort, kind, fm_stratum, kv, taus);
      if (fit.skipped_out_of_domain > 0) {
        err << "warning: " << fit.skipped_out_of_domain << " observations outside the knot domain skipped\n";
      }
      const auto check_grid = age_grid(kv, fm_repair ? fm_repair : 101);
      const auto crossings = detect_crossings(fit.chart, check_grid);
      if (fm_repair) {
        fit.chart = with_repaired_grid(fit.chart, check_grid);
      } else if (!crossings.empty()) {
        err << "warning: curves cross at " << crossings.size()
            << " grid points; refit with --repair-grid to store a rearranged grid\n";
      }
      const std::string path = resolve_out(config, fm_out);
      save_model_file(path, fit.chart);
      out << "wrote " << path << ": " << fit.chart.taus.size() << " " << to_string(kind) << " curves from "
          << fit.chart.fitted_n << " observations, " << crossings.size() << " crossings"
          << (fm_repair ? " repaired" : "") << "\n";
      return kExitOk;
    }

    if (app.got_subcommand(fc)) {
      Cohort cohort = load_reported(fc_cohort, err);
      if (!fc_stratum.empty()) cohort = filter_stratum(cohort, fc_stratum);
      ConditionalModelSpec spec = config.conditional;
      if (fc_tau_opt->count()) spec.tau = fc_tau;
      if (fc_lags_opt->count()) spec.n_lags = fc_lags;
      if (fc_tv_opt->count()) spec.time_varying_lag = fc_tv;
      if (fc_nocov_opt->count() && fc_cov_opt->count()) {
        throw ValidationError("--covariates and --no-covariates are exclusive");
      }
      if (fc_nocov_opt->count()) spec.covariates.clear();
      if (fc_cov_opt->count()) {
        spec.covariates.clear();
        for (const auto& name : fc_covariates) spec.covariates.push_back(parse_covariate(name));
      }
      const KnotVector kv = fc_knots.apply(config.conditional_knots);
      const ConditionalModel model = fit_conditional(cohort, spec, kv);
      const std::string path = resolve_out(config, fc_out);
      save_model_file(path, model);
      out << "wrote " << path << ": tau " << format_double(model.spec.tau) << ", " << model.training_rows
          << " rows, " << model.coefficients.size() << " coefficients\n";
      if (!model.spec.time_varying_lag) {
        const int p = kv.dimension();
        for (int l = 0; l < model.spec.n_lags; ++l) {
          out << "lag " << l + 1 << ": " << format_double(model.coefficients[p + l]) << "\n";
        }
      }
      return kExitOk;
    }

    if (app.got_subcommand(fcu)) {
      const Cohort cohort = load_reported(fcu_cohort, err);
      const MarginalChart chart = load_chart_file(fcu_chart);
      const KnotVector kv = fcu_knots.apply(config.catchup_knots);
      CatchupOptions options;
      options.min_gap = fcu_min_gap;
      const CatchupRows rows = catchup_rows(cohort, chart, kv, fcu_z, options);
      const CatchupModel model =
          fit_catchup(cohort, chart, kv, fcu_z, fs::path(fcu_chart).filename().string(), options);
      const std::string path = resolve_out(config, fcu_out);
      save_model_file(path, model);
      out << "wrote " << path << ": " << rows.y.size() << " rows, " << rows.skipped_short_gap
          << " short gaps skipped, " << rows.dropped_zero_rows << " zero rows dropped\n";
      return kExitOk;
    }

    if (app.got_subcommand(pc)) {
      const MarginalChart chart = load_chart_file(pc_chart);
      out << percentile_of(chart, pc_age, pc_value).to_string() << "\n";
      return kExitOk;
    }

    if (app.got_subcommand(pr)) {
      const ConditionalModel model = load_conditional_file(pr_model);
      const auto prior = parse_prior(pr_prior);
      std::optional<double> height;
      if (pr_height_opt->count()) height = pr_height;
      out << format_double(predict_conditional(model, pr_age, prior, height)) << "\n";
      return kExitOk;
    }

    if (app.got_subcommand(sc)) {
      const ConditionalModel watch = load_conditional_file(sc_m90);
      const ConditionalModel alert = load_conditional_file(sc_m97);
      if (watch.spec.tau != config.screening.watch || alert.spec.tau != config.screening.alert) {
        throw ValidationError("screening models are fitted at tau " + format_double(watch.spec.tau) + " and " +
                              format_double(alert.spec.tau) + ", expected " + format_double(config.screening.watch) +
                              " and " + format_double(config.screening.alert));
      }
      if (watch.spec.n_lags != alert.spec.n_lags) {
        throw ValidationError("screening models use different numbers of lags");
      }
      const Cohort cohort = load_reported(sc_cohort, err);
      const auto it = cohort.subjects.find(sc_subject);
      if (it == cohort.subjects.end()) throw ValidationError("unknown subject " + sc_subject);
      std::optional<double> age;
      if (sc_age_opt->count()) age = sc_age;
      const Measurement& visit = find_visit(it->second, age, sc_subject);
      std::vector<PriorVisit> prior;
      for (const auto& m : it->second) {
        if (m.age < visit.age && m.weight) prior.push_back({m.age, *m.weight});
      }
      const auto n_lags = static_cast<std::size_t>(watch.spec.n_lags);
      if (prior.size() < n_lags) {
        throw ValidationError("subject " + sc_subject + " has " + std::to_string(prior.size()) +
                              " earlier weighed visits, the models need " + std::to_string(n_lags));
      }
      prior.erase(prior.begin(), prior.end() - static_cast<std::ptrdiff_t>(n_lags));
      const std::map<double, ConditionalModel> models{{watch.spec.tau, watch}, {alert.spec.tau, alert}};
      const ScreeningFlag flag =
          screen(models, visit.age, *visit.weight, prior, visit.height, config.screening);
      out << "subject " << sc_subject << " age " << format_double(visit.age) << " weight "
          << format_double(*visit.weight) << "\n";
      for (const auto& [tau, q] : flag.thresholds) {
        out << "threshold " << format_double(tau) << ": " << format_double(q) << "\n";
      }
      if (flag.warning) out << "warning: " << *flag.warning << "\n";
      out << "level: " << to_string(flag.level) << "\n";
      return kExitOk;
    }

    if (app.got_subcommand(rg)) {
      const Cohort cohort = load_reported(rg_cohort, err);
      ReferenceCriteria criteria = config.reference;
      criteria.anchor_age = rg_anchor;
      criteria.target_age = rg_target;
      if (rg_aw_opt->count()) criteria.age_window = rg_aw;
      if (rg_ww_opt->count()) criteria.weight_window = rg_ww;
      if (rg_tw_opt->count()) criteria.target_window = rg_tw;
      const PeerSet set = select_peers(cohort, rg_subject, criteria);
      out << "peers: " << set.peers.size() << "\n";
      out << "probe anchor: age " << format_double(set.probe_anchor.age) << " weight "
          << format_double(*set.probe_anchor.weight) << "\n";
      if (set.empty_warnings) err << "warning: no peers matched the windows\n";
      if (!set.probe_target || !set.probe_target->weight) {
        out << "probe target: none within the target window\n";
        return kExitOk;
      }
      const Measurement& target = *set.probe_target;
      out << "probe target: age " << format_double(target.age) << " weight " << format_double(*target.weight)
          << "\n";
      if (set.peers.empty()) {
        out << "percentile: n/a\n";
        return kExitOk;
      }
      std::vector<double> values;
      for (const auto& p : set.peers) values.push_back(*p.target.weight);
      out << "percentile: " << fixed(empirical_percentile(values, *target.weight), 1) << "\n";
      const PeerComparisonReport report = peer_comparison_report(set.peers, target);
      out << "heavier peers: " << report.heavier.size() << "\n";
      if (!report.heavier.empty()) {
        out << "subject_id,weight_kg,height_diff_cm\n";
        for (const auto& h : report.heavier) {
          out << h.subject_id << "," << format_double(h.weight) << ","
              << (h.height_difference ? fixed(*h.height_difference, 2) : std::string("unknown")) << "\n";
        }
      }
      out << "taller: " << report.taller << ", shorter: " << report.shorter << ", same: " << report.same_height
          << ", unknown: " << report.unknown << "\n";
      return kExitOk;
    }

    if (app.got_subcommand(ex)) {
      const AnyModel model = load_model_file(ex_model);
      CurveSet curves;
      if (const auto* chart = std::get_if<MarginalChart>(&model)) {
        curves = chart_curves(*chart, age_grid(chart->kv, ex_grid));
      } else if (const auto* cu = std::get_if<CatchupModel>(&model)) {
        curves = catchup_curve(*cu, age_grid(cu->kv_b, ex_grid));
      } else {
        throw ModelTypeError("export supports marginal charts and catch-up models");
      }
      const std::string text = ex_format == "svg" ? to_svg(curves) : to_table(curves);
      if (ex_out.empty()) {
        out << text;
      } else {
        const std::string path = resolve_out(config, ex_out);
        write_text(path, text);
        out << "wrote " << path << "\n";
      }
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}

}  // namespace centile::cli
