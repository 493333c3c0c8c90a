#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "centile/cohort.hpp"

namespace centile {

enum class GeneratorMode {
  Marginal,     // W = mu(t) + sigma(t) * eps
  Catchup,      // forward simulation of the catch-up rate equation
  Conditional,  // W_j = g(t_j) + lag * W_{j-1} + height_coef * H_j + e
};

enum class NoiseKind { Normal, Laplace };

/// Polynomial in age, coefficients in increasing power order.
struct Polynomial {
  std::vector<double> coef;
  double operator()(double t) const;
};

struct VisitSchedule {
  /// Fixed nominal ages (each jittered uniformly by +-jitter).  When empty,
  /// `visits` ages are drawn uniformly on [age_min, age_max].
  std::vector<double> ages;
  double jitter = 0.0;
  int visits = 6;
  double age_min = 0.0;
  double age_max = 2.0;
};

struct GeneratorParams {
  GeneratorMode mode = GeneratorMode::Marginal;
  int n_subjects = 100;
  std::uint64_t seed = 0;
  std::string stratum = "M";
  VisitSchedule schedule;

  Polynomial median{{3.0, 6.0, -2.0}};  // mu(t), kg
  Polynomial scale{{0.3, 0.2}};         // sigma(t), kg
  NoiseKind noise = NoiseKind::Normal;
  double subject_correlation = 0.0;     // shared share of eps variance within a subject

  Polynomial height_median{{50.0, 25.0, -4.0}};  // cm
  double height_subject_sd = 2.5;
  double height_noise_sd = 0.5;

  // Catch-up mode: b(t) = b_constant + b_amplitude * exp(-t / b_decay).
  double b_constant = -0.5;
  double b_amplitude = 0.0;
  double b_decay = 0.25;
  double initial_deviation_sd = 0.6;  // kg, deviation from mu at the first visit
  double rate_noise_sd = 0.5;         // kg/year, scale of e in the rate equation

  // Conditional mode.
  double lag = 0.6;
  double height_coef = 0.02;
  double conditional_noise_sd = 0.15;

  double catchup_b(double t) const;
};

/// Deterministic for fixed params (including the seed).  Throws
/// ValidationError for an invalid schedule or parameter set.
Cohort simulate_cohort(const GeneratorParams& params);

void validate(const GeneratorParams& params);

/// Generator parameters from / to the JSON config syntax.  Unknown keys are
/// rejected; "seed" is mandatory.
GeneratorParams generator_params_from_json(const std::string& text);
std::string generator_params_to_json(const GeneratorParams& params);

GeneratorMode parse_generator_mode(const std::string& name);
std::string to_string(GeneratorMode mode);

}  // namespace centile
