#include "run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "centile/charts.hpp"
#include "centile/errors.hpp"

namespace centile::cli {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& keys, const std::string& where) {
  if (!j.is_object()) throw ValidationError("config: " + where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!keys.count(key)) throw ValidationError("config: unknown key '" + where + "." + key + "'");
  }
}

template <typename T>
void read_if(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config: '" + where + "." + key + "' has the wrong type");
  }
}

KnotVector read_knots(const json& j, const std::string& where) {
  reject_unknown(j, {"degree", "boundary", "interior"}, where);
  int degree = 3;
  std::vector<double> boundary{0.0, 2.0};
  std::vector<double> interior;
  read_if(j, "degree", degree, where);
  read_if(j, "boundary", boundary, where);
  read_if(j, "interior", interior, where);
  if (boundary.size() != 2) throw ValidationError("config: '" + where + ".boundary' needs two ages");
  return make_knots(degree, boundary[0], boundary[1], interior);
}

}  // namespace

RunConfig default_run_config() {
  RunConfig c;
  c.taus = default_taus();
  return c;
}

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  reject_unknown(j, {"knots", "taus", "conditional", "screening", "reference", "output_dir", "seed",
                     "generator"},
                 "$");
  RunConfig c = default_run_config();
  if (j.contains("knots")) {
    const json& k = j.at("knots");
    reject_unknown(k, {"marginal", "conditional", "catchup"}, "knots");
    if (k.contains("marginal")) c.marginal_knots = read_knots(k.at("marginal"), "knots.marginal");
    if (k.contains("conditional")) c.conditional_knots = read_knots(k.at("conditional"), "knots.conditional");
    if (k.contains("catchup")) c.catchup_knots = read_knots(k.at("catchup"), "knots.catchup");
  }
  read_if(j, "taus", c.taus, "$");
  if (j.contains("conditional")) {
    const json& s = j.at("conditional");
    reject_unknown(s, {"tau", "n_lags", "covariates", "time_varying_lag"}, "conditional");
    read_if(s, "tau", c.conditional.tau, "conditional");
    read_if(s, "n_lags", c.conditional.n_lags, "conditional");
    read_if(s, "time_varying_lag", c.conditional.time_varying_lag, "conditional");
    if (s.contains("covariates")) {
      std::vector<std::string> names;
      read_if(s, "covariates", names, "conditional");
      c.conditional.covariates.clear();
      for (const auto& n : names) c.conditional.covariates.push_back(parse_covariate(n));
    }
  }
  if (j.contains("screening")) {
    const json& s = j.at("screening");
    reject_unknown(s, {"watch", "alert"}, "screening");
    read_if(s, "watch", c.screening.watch, "screening");
    read_if(s, "alert", c.screening.alert, "screening");
  }
  if (j.contains("reference")) {
    const json& r = j.at("reference");
    reject_unknown(r, {"age_window", "weight_window", "target_window"}, "reference");
    read_if(r, "age_window", c.reference.age_window, "reference");
    read_if(r, "weight_window", c.reference.weight_window, "reference");
    read_if(r, "target_window", c.reference.target_window, "reference");
  }
  read_if(j, "output_dir", c.output_dir, "$");
  if (j.contains("seed")) {
    std::uint64_t seed = 0;
    read_if(j, "seed", seed, "$");
    c.seed = seed;
  }
  if (j.contains("generator")) {
    c.generator = j.at("generator");
    if (!c.generator.is_object()) throw ValidationError("config: 'generator' must be an object");
  }
  validate(c);
  return c;
}

RunConfig load_run_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

void validate(const RunConfig& c) {
  validate_taus(c.taus);
  normalized(c.conditional);
  const double w = c.screening.watch, a = c.screening.alert;
  if (!(w > 0.0 && w < 1.0 && a > 0.0 && a < 1.0 && w < a)) {
    throw ValidationError("config: screening thresholds must be increasing probabilities");
  }
  for (double v : {c.reference.age_window, c.reference.weight_window, c.reference.target_window}) {
    if (!(v >= 0.0)) throw ValidationError("config: reference windows must be nonnegative");
  }
}

}  // namespace centile::cli
