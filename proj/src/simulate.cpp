#include "centile/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "centile/errors.hpp"
#include "centile/rng.hpp"

namespace centile {

using nlohmann::json;

double Polynomial::operator()(double t) const {
  double v = 0.0;
  for (auto it = coef.rbegin(); it != coef.rend(); ++it) v = v * t + *it;
  return v;
}

double GeneratorParams::catchup_b(double t) const {
  return b_constant + (b_amplitude != 0.0 ? b_amplitude * std::exp(-t / b_decay) : 0.0);
}

GeneratorMode parse_generator_mode(const std::string& name) {
  if (name == "marginal") return GeneratorMode::Marginal;
  if (name == "catchup") return GeneratorMode::Catchup;
  if (name == "conditional") return GeneratorMode::Conditional;
  throw ValidationError("unknown generator mode '" + name + "'");
}

std::string to_string(GeneratorMode mode) {
  switch (mode) {
    case GeneratorMode::Marginal: return "marginal";
    case GeneratorMode::Catchup: return "catchup";
    case GeneratorMode::Conditional: return "conditional";
  }
  return "marginal";
}

void validate(const GeneratorParams& p) {
  if (p.n_subjects < 1) throw ValidationError("generator: n_subjects must be >= 1");
  const auto& s = p.schedule;
  if (!(s.age_min >= 0.0 && s.age_min < s.age_max)) {
    throw ValidationError("generator: schedule needs 0 <= age_min < age_max");
  }
  if (s.ages.empty()) {
    if (s.visits < 1) throw ValidationError("generator: schedule needs at least one visit");
  } else {
    for (std::size_t i = 0; i < s.ages.size(); ++i) {
      if (s.ages[i] < s.age_min || s.ages[i] > s.age_max) {
        throw ValidationError("generator: scheduled age outside [age_min, age_max]");
      }
      if (i > 0 && !(s.ages[i] > s.ages[i - 1])) {
        throw ValidationError("generator: scheduled ages must be strictly increasing");
      }
    }
    if (s.jitter < 0.0) throw ValidationError("generator: jitter must be nonnegative");
    if (s.ages.size() > 1) {
      double min_gap = s.ages[1] - s.ages[0];
      for (std::size_t i = 2; i < s.ages.size(); ++i) min_gap = std::min(min_gap, s.ages[i] - s.ages[i - 1]);
      if (2.0 * s.jitter >= min_gap) {
        throw ValidationError("generator: jitter must be below half the smallest visit gap");
      }
    }
  }
  if (p.median.coef.empty() || p.scale.coef.empty() || p.height_median.coef.empty()) {
    throw ValidationError("generator: curve polynomials need at least one coefficient");
  }
  if (p.subject_correlation < 0.0 || p.subject_correlation > 1.0) {
    throw ValidationError("generator: subject_correlation must lie in [0,1]");
  }
  if (p.b_amplitude != 0.0 && !(p.b_decay > 0.0)) {
    throw ValidationError("generator: b_decay must be positive");
  }
  if (p.height_subject_sd < 0 || p.height_noise_sd < 0 || p.initial_deviation_sd < 0 ||
      p.rate_noise_sd < 0 || p.conditional_noise_sd < 0) {
    throw ValidationError("generator: standard deviations must be nonnegative");
  }
}

namespace {

std::vector<double> draw_ages(const VisitSchedule& s, Xoshiro256& rng) {
  std::vector<double> ages;
  if (!s.ages.empty()) {
    for (double a : s.ages) {
      double t = s.jitter > 0.0 ? a + rng.uniform(-s.jitter, s.jitter) : a;
      ages.push_back(std::clamp(t, s.age_min, s.age_max));
    }
    // Clamping at the ends can only create ties at age_min/age_max.
    ages.erase(std::unique(ages.begin(), ages.end()), ages.end());
    return ages;
  }
  for (int k = 0; k < s.visits; ++k) ages.push_back(rng.uniform(s.age_min, s.age_max));
  std::sort(ages.begin(), ages.end());
  ages.erase(std::unique(ages.begin(), ages.end()), ages.end());
  return ages;
}

double noise(const GeneratorParams& p, Xoshiro256& rng) {
  return p.noise == NoiseKind::Normal ? rng.normal() : rng.laplace();
}

std::string subject_name(int i, int n) {
  const int width = static_cast<int>(std::to_string(n).size());
  char buf[32];
  std::snprintf(buf, sizeof(buf), "S%0*d", width, i + 1);
  return buf;
}

}  // namespace

Cohort simulate_cohort(const GeneratorParams& p) {
  validate(p);
  Xoshiro256 rng(p.seed);
  Cohort cohort;
  const double shared = std::sqrt(p.subject_correlation);
  const double own = std::sqrt(1.0 - p.subject_correlation);
  for (int i = 0; i < p.n_subjects; ++i) {
    const std::string id = subject_name(i, p.n_subjects);
    const std::vector<double> ages = draw_ages(p.schedule, rng);
    const double height_effect = p.height_subject_sd * rng.normal();
    const double subject_eps = noise(p, rng);
    std::vector<Measurement> visits;
    double prev_weight = 0.0;
    for (std::size_t j = 0; j < ages.size(); ++j) {
      const double t = ages[j];
      Measurement m;
      m.subject_id = id;
      m.stratum = p.stratum;
      m.age = t;
      const double height = p.height_median(t) + height_effect + p.height_noise_sd * rng.normal();
      m.height = height;
      double w = 0.0;
      switch (p.mode) {
        case GeneratorMode::Marginal:
          w = p.median(t) + p.scale(t) * (shared * subject_eps + own * noise(p, rng));
          break;
        case GeneratorMode::Catchup:
          if (j == 0) {
            w = p.median(t) + p.initial_deviation_sd * rng.normal();
          } else {
            const double s = ages[j - 1];
            const double d = t - s;
            const double deviation = prev_weight - p.median(s);
            w = prev_weight + (p.median(t) - p.median(s)) + d * p.catchup_b(s) * deviation +
                d * p.rate_noise_sd * noise(p, rng);
          }
          break;
        case GeneratorMode::Conditional:
          if (j == 0) {
            w = p.median(t) + p.scale(t) * noise(p, rng);
          } else {
            const double g = (1.0 - p.lag) * p.median(t) - p.height_coef * p.height_median(t);
            w = g + p.lag * prev_weight + p.height_coef * height +
                p.conditional_noise_sd * noise(p, rng);
          }
          break;
      }
      m.weight = w;
      prev_weight = w;
      visits.push_back(std::move(m));
    }
    cohort.subjects.emplace(id, std::move(visits));
  }
  cohort.strata.insert(p.stratum);
  return cohort;
}

namespace {

const std::set<std::string> kTopKeys = {
    "mode", "n_subjects", "seed", "stratum", "schedule", "median", "scale", "noise",
    "subject_correlation", "height_median", "height_subject_sd", "height_noise_sd", "b_constant",
    "b_amplitude", "b_decay", "initial_deviation_sd", "rate_noise_sd", "lag", "height_coef",
    "conditional_noise_sd"};

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception&) {
      throw ValidationError(std::string("generator params: field '") + key + "' has the wrong type");
    }
  }
}

}  // namespace

GeneratorParams generator_params_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("generator params: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("generator params: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kTopKeys.count(key)) throw ValidationError("generator params: unknown key '" + key + "'");
  }
  if (!j.contains("seed")) throw ValidationError("generator params: 'seed' is mandatory");
  GeneratorParams p;
  std::string mode = to_string(p.mode);
  read_if(j, "mode", mode);
  p.mode = parse_generator_mode(mode);
  read_if(j, "n_subjects", p.n_subjects);
  read_if(j, "seed", p.seed);
  read_if(j, "stratum", p.stratum);
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    if (!s.is_object()) throw ValidationError("generator params: 'schedule' must be an object");
    read_if(s, "ages", p.schedule.ages);
    read_if(s, "jitter", p.schedule.jitter);
    read_if(s, "visits", p.schedule.visits);
    read_if(s, "age_min", p.schedule.age_min);
    read_if(s, "age_max", p.schedule.age_max);
  }
  read_if(j, "median", p.median.coef);
  read_if(j, "scale", p.scale.coef);
  std::string noise_name = p.noise == NoiseKind::Normal ? "normal" : "laplace";
  read_if(j, "noise", noise_name);
  if (noise_name == "normal") {
    p.noise = NoiseKind::Normal;
  } else if (noise_name == "laplace") {
    p.noise = NoiseKind::Laplace;
  } else {
    throw ValidationError("generator params: unknown noise kind '" + noise_name + "'");
  }
  read_if(j, "subject_correlation", p.subject_correlation);
  read_if(j, "height_median", p.height_median.coef);
  read_if(j, "height_subject_sd", p.height_subject_sd);
  read_if(j, "height_noise_sd", p.height_noise_sd);
  read_if(j, "b_constant", p.b_constant);
  read_if(j, "b_amplitude", p.b_amplitude);
  read_if(j, "b_decay", p.b_decay);
  read_if(j, "initial_deviation_sd", p.initial_deviation_sd);
  read_if(j, "rate_noise_sd", p.rate_noise_sd);
  read_if(j, "lag", p.lag);
  read_if(j, "height_coef", p.height_coef);
  read_if(j, "conditional_noise_sd", p.conditional_noise_sd);
  validate(p);
  return p;
}

std::string generator_params_to_json(const GeneratorParams& p) {
  json j;
  j["mode"] = to_string(p.mode);
  j["n_subjects"] = p.n_subjects;
  j["seed"] = p.seed;
  j["stratum"] = p.stratum;
  j["schedule"] = {{"ages", p.schedule.ages},
                   {"jitter", p.schedule.jitter},
                   {"visits", p.schedule.visits},
                   {"age_min", p.schedule.age_min},
                   {"age_max", p.schedule.age_max}};
  j["median"] = p.median.coef;
  j["scale"] = p.scale.coef;
  j["noise"] = p.noise == NoiseKind::Normal ? "normal" : "laplace";
  j["subject_correlation"] = p.subject_correlation;
  j["height_median"] = p.height_median.coef;
  j["height_subject_sd"] = p.height_subject_sd;
  j["height_noise_sd"] = p.height_noise_sd;
  j["b_constant"] = p.b_constant;
  j["b_amplitude"] = p.b_amplitude;
  j["b_decay"] = p.b_decay;
  j["initial_deviation_sd"] = p.initial_deviation_sd;
  j["rate_noise_sd"] = p.rate_noise_sd;
  j["lag"] = p.lag;
  j["height_coef"] = p.height_coef;
  j["conditional_noise_sd"] = p.conditional_noise_sd;
  return j.dump(2);
}

}  // namespace centile
