#include "centile/model_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "centile/errors.hpp"

namespace centile {

using nlohmann::json;

namespace {

json knots_to_json(const KnotVector& kv) {
  return {{"degree", kv.degree()},
          {"boundary", {kv.t_min(), kv.t_max()}},
          {"interior", kv.interior()}};
}

json vector_to_json(const Vector& v) { return std::vector<double>(v.begin(), v.end()); }

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vector_to_json(m.row(r).transpose()));
  return rows;
}

// Accessors that report the JSON path of the first schema violation.
const json& field(const json& j, const std::string& path, const char* key) {
  if (!j.is_object()) throw SchemaError(path + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(path + "." + key + ": missing field");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path + ": expected a number");
  return j.get<double>();
}

long long integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw SchemaError(path + ": expected an integer");
  return j.get<long long>();
}

bool boolean(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw SchemaError(path + ": expected a boolean");
  return j.get<bool>();
}

std::string string(const json& j, const std::string& path) {
  if (!j.is_string()) throw SchemaError(path + ": expected a string");
  return j.get<std::string>();
}

std::vector<double> numbers(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path + ": expected an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

Vector vector(const json& j, const std::string& path) {
  std::vector<double> v = numbers(j, path);
  return Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Matrix matrix(const json& j, const std::string& path, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw SchemaError(path + ": expected " + std::to_string(rows) + " rows");
  }
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::string rp = path + "[" + std::to_string(r) + "]";
    Vector row = vector(j[r], rp);
    if (row.size() != cols) throw SchemaError(rp + ": expected " + std::to_string(cols) + " values");
    m.row(r) = row.transpose();
  }
  return m;
}

KnotVector knots(const json& j, const std::string& path) {
  const int degree = static_cast<int>(integer(field(j, path, "degree"), path + ".degree"));
  std::vector<double> boundary = numbers(field(j, path, "boundary"), path + ".boundary");
  if (boundary.size() != 2) throw SchemaError(path + ".boundary: expected two ages");
  std::vector<double> interior = numbers(field(j, path, "interior"), path + ".interior");
  try {
    return KnotVector(degree, boundary[0], boundary[1], std::move(interior));
  } catch (const ValidationError& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

json to_json(const MarginalChart& c) {
  json j;
  j["scheme"] = kMarginalScheme;
  j["kind"] = to_string(c.kind);
  j["stratum"] = c.stratum;
  j["knots"] = knots_to_json(c.kv);
  j["taus"] = c.taus;
  j["coef"] = matrix_to_json(c.coef);
  j["fitted_n"] = c.fitted_n;
  if (c.repaired) {
    j["repaired"] = {{"ages", c.repaired->ages}, {"values", matrix_to_json(c.repaired->values)}};
  }
  return j;
}

json to_json(const ConditionalModel& m) {
  json covariates = json::array();
  for (Covariate c : m.spec.covariates) covariates.push_back(to_string(c));
  json j;
  j["scheme"] = kConditionalScheme;
  j["spec"] = {{"tau", m.spec.tau},
               {"n_lags", m.spec.n_lags},
               {"covariates", covariates},
               {"time_varying_lag", m.spec.time_varying_lag}};
  j["knots"] = knots_to_json(m.kv);
  j["coefficients"] = vector_to_json(m.coefficients);
  j["training_rows"] = m.training_rows;
  return j;
}

json to_json(const CatchupModel& m) {
  json j;
  j["scheme"] = kCatchupScheme;
  j["knots"] = knots_to_json(m.kv_b);
  j["coefficients"] = vector_to_json(m.coefficients);
  j["use_zscores"] = m.use_zscores;
  j["reference_chart"] = m.reference_chart;
  j["residuals"] = vector_to_json(m.residuals);
  return j;
}

MarginalChart chart_from(const json& j) {
  MeasurementKind kind;
  try {
    kind = parse_measurement_kind(string(field(j, "$", "kind"), "$.kind"));
  } catch (const ValidationError& e) {
    throw SchemaError(std::string("$.kind: ") + e.what());
  }
  KnotVector kv = knots(field(j, "$", "knots"), "$.knots");
  std::vector<double> taus = numbers(field(j, "$", "taus"), "$.taus");
  try {
    validate_taus(taus);
  } catch (const ValidationError& e) {
    throw SchemaError(std::string("$.taus: ") + e.what());
  }
  Matrix coef = matrix(field(j, "$", "coef"), "$.coef", static_cast<Eigen::Index>(taus.size()),
                       kv.dimension());
  const long long n = integer(field(j, "$", "fitted_n"), "$.fitted_n");
  if (n < 0) throw SchemaError("$.fitted_n: must be nonnegative");
  MarginalChart chart{kind, string(field(j, "$", "stratum"), "$.stratum"), std::move(kv),
                      std::move(taus), std::move(coef), static_cast<std::size_t>(n), std::nullopt};
  if (j.contains("repaired")) {
    const json& r = j.at("repaired");
    RepairedGrid grid;
    grid.ages = numbers(field(r, "$.repaired", "ages"), "$.repaired.ages");
    grid.values = matrix(field(r, "$.repaired", "values"), "$.repaired.values",
                         static_cast<Eigen::Index>(grid.ages.size()),
                         static_cast<Eigen::Index>(chart.taus.size()));
    chart.repaired = std::move(grid);
  }
  return chart;
}

ConditionalModel conditional_from(const json& j) {
  const json& s = field(j, "$", "spec");
  ConditionalModelSpec spec;
  spec.tau = number(field(s, "$.spec", "tau"), "$.spec.tau");
  spec.n_lags = static_cast<int>(integer(field(s, "$.spec", "n_lags"), "$.spec.n_lags"));
  spec.time_varying_lag = boolean(field(s, "$.spec", "time_varying_lag"), "$.spec.time_varying_lag");
  const json& cov = field(s, "$.spec", "covariates");
  if (!cov.is_array()) throw SchemaError("$.spec.covariates: expected an array");
  spec.covariates.clear();
  for (std::size_t i = 0; i < cov.size(); ++i) {
    const std::string path = "$.spec.covariates[" + std::to_string(i) + "]";
    try {
      spec.covariates.push_back(parse_covariate(string(cov[i], path)));
    } catch (const ValidationError& e) {
      throw SchemaError(path + ": " + e.what());
    }
  }
  try {
    spec = normalized(spec);
  } catch (const Error& e) {
    throw SchemaError(std::string("$.spec: ") + e.what());
  }
  KnotVector kv = knots(field(j, "$", "knots"), "$.knots");
  Vector coef = vector(field(j, "$", "coefficients"), "$.coefficients");
  if (coef.size() != conditional_width(spec, kv.dimension())) {
    throw SchemaError("$.coefficients: expected " +
                      std::to_string(conditional_width(spec, kv.dimension())) + " values");
  }
  const long long rows = integer(field(j, "$", "training_rows"), "$.training_rows");
  if (rows < 0) throw SchemaError("$.training_rows: must be nonnegative");
  return ConditionalModel{spec, std::move(kv), std::move(coef), static_cast<std::size_t>(rows)};
}

CatchupModel catchup_from(const json& j) {
  KnotVector kv = knots(field(j, "$", "knots"), "$.knots");
  Vector coef = vector(field(j, "$", "coefficients"), "$.coefficients");
  if (coef.size() != kv.dimension()) {
    throw SchemaError("$.coefficients: expected " + std::to_string(kv.dimension()) + " values");
  }
  return CatchupModel{std::move(kv), std::move(coef),
                      boolean(field(j, "$", "use_zscores"), "$.use_zscores"),
                      string(field(j, "$", "reference_chart"), "$.reference_chart"),
                      vector(field(j, "$", "residuals"), "$.residuals")};
}

}  // namespace

std::string model_to_json(const AnyModel& model) {
  return std::visit([](const auto& m) { return to_json(m).dump(2); }, model) + "\n";
}

AnyModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("$: not a valid model document (") + e.what() + ")");
  }
  const std::string scheme = string(field(j, "$", "scheme"), "$.scheme");
  if (scheme == kMarginalScheme) return chart_from(j);
  if (scheme == kConditionalScheme) return conditional_from(j);
  if (scheme == kCatchupScheme) return catchup_from(j);
  throw SchemaError("$.scheme: unknown scheme '" + scheme + "'");
}

void save_model(std::ostream& out, const AnyModel& model) { out << model_to_json(model); }

void save_model_file(const std::string& path, const AnyModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write model file " + path);
  save_model(out, model);
}

AnyModel load_model(std::istream& in) {
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

AnyModel load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open model file " + path);
  return load_model(in);
}

namespace {

template <typename T>
T expect(AnyModel model, const char* wanted) {
  if (auto* m = std::get_if<T>(&model)) return std::move(*m);
  throw ModelTypeError(std::string("model file does not hold a ") + wanted);
}

}  // namespace

MarginalChart as_chart(AnyModel model) {
  return expect<MarginalChart>(std::move(model), "marginal chart");
}
ConditionalModel as_conditional(AnyModel model) {
  return expect<ConditionalModel>(std::move(model), "conditional model");
}
CatchupModel as_catchup(AnyModel model) {
  return expect<CatchupModel>(std::move(model), "catch-up model");
}

MarginalChart load_chart_file(const std::string& path) { return as_chart(load_model_file(path)); }
ConditionalModel load_conditional_file(const std::string& path) {
  return as_conditional(load_model_file(path));
}
CatchupModel load_catchup_file(const std::string& path) {
  return as_catchup(load_model_file(path));
}

}  // namespace centile
