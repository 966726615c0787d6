#pragma once

// DDPM variance schedule, frequency curricula and guidance step sizes.
//
// Diffusion steps are 1-based, t = 1..T, with alpha_bar_0 = 1. Curricula and
// step sizes are parameterized by the reverse-process progress
// u = (T - t) / (T - 1), so u = 0 at t = T (first reverse step) and u = 1 at
// t = 1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "fgps/error.hpp"
#include "fgps/spectral_prior.hpp"

namespace fgps {

struct VarianceSchedule {
  std::size_t T = 0;
  std::vector<double> beta;        // index t-1
  std::vector<double> alpha_bar;   // index t-1
  std::vector<double> sigma_tilde; // index t-1; sigma_tilde_1 = 0

  double beta_at(std::size_t t) const { return beta.at(t - 1); }
  double alpha_at(std::size_t t) const { return 1.0 - beta.at(t - 1); }
  double alpha_bar_at(std::size_t t) const { return t == 0 ? 1.0 : alpha_bar.at(t - 1); }
  double sigma_tilde_at(std::size_t t) const { return sigma_tilde.at(t - 1); }
};

inline constexpr double kDefaultBetaMin = 1e-4;
inline constexpr double kDefaultBetaMax = 0.02;
inline constexpr std::size_t kReferenceSteps = 1000;

// beta_max scaled by 1000 / T so shorter schedules still reach ab_T ~ 0.
inline double rescaled_beta_max(std::size_t T) {
  detail::require(T >= 2, "schedule: T must be at least 2");
  return kDefaultBetaMax * static_cast<double>(kReferenceSteps) / static_cast<double>(T);
}

inline VarianceSchedule ddpm_variance_schedule(std::size_t T, double beta_min = kDefaultBetaMin,
                                               double beta_max = kDefaultBetaMax) {
  detail::require(T >= 2, "schedule: T must be at least 2");
  detail::require(std::isfinite(beta_min) && std::isfinite(beta_max) && beta_min > 0.0 && beta_min <= beta_max &&
                      beta_max < 1.0,
                  "schedule: need 0 < beta_min <= beta_max < 1");
  VarianceSchedule s;
  s.T = T;
  s.beta.resize(T);
  s.alpha_bar.resize(T);
  s.sigma_tilde.resize(T);
  double prod = 1.0;
  for (std::size_t i = 0; i < T; ++i) {
    s.beta[i] = beta_min + (beta_max - beta_min) * static_cast<double>(i) / static_cast<double>(T - 1);
    prod *= 1.0 - s.beta[i];
    s.alpha_bar[i] = prod;
  }
  s.sigma_tilde[0] = 0.0;
  for (std::size_t i = 1; i < T; ++i) {
    const double var = (1.0 - s.alpha_bar[i - 1]) / (1.0 - s.alpha_bar[i]) * s.beta[i];
    s.sigma_tilde[i] = std::sqrt(std::max(var, 0.0));
  }
  return s;
}

// Desk default: beta_min unchanged, beta_max rescaled for T.
inline VarianceSchedule desk_variance_schedule(std::size_t T) {
  return ddpm_variance_schedule(T, kDefaultBetaMin, rescaled_beta_max(T));
}

inline double progress(std::size_t t, std::size_t T) {
  detail::require(T >= 2 && t >= 1 && t <= T, "progress: need 1 <= t <= T, T >= 2");
  return static_cast<double>(T - t) / static_cast<double>(T - 1);
}

// How sigma_t^2 is formed from ab_t for the data-dependent curriculum.
//   squared:            sigma_t = 1/ab - 1, compared as sigma_t^2
//   variance_exploding: sigma_t^2 = 1/ab - 1
enum class NoiseReading { squared, variance_exploding };

struct FrequencyCurriculum {
  enum class Kind { fixed, linear, exponential, data_dependent };

  Kind kind = Kind::fixed;
  double tau_start = 1.0;  // tau_T
  double tau_end = 1.0;    // tau_1
  std::optional<std::vector<double>> spectrum;  // data_dependent only
  double sigma_y = 1.0;                         // data_dependent only
  NoiseReading reading = NoiseReading::squared;
};

inline void validate(const FrequencyCurriculum& c) {
  detail::require(std::isfinite(c.tau_start) && std::isfinite(c.tau_end) && 0.0 <= c.tau_start &&
                      c.tau_start <= c.tau_end && c.tau_end <= 1.0,
                  "curriculum: need 0 <= tau_start <= tau_end <= 1");
  if (c.kind == FrequencyCurriculum::Kind::data_dependent) {
    if (!c.spectrum || c.spectrum->size() < 2) throw InvalidConfiguration("data-dependent curriculum needs a spectrum");
    detail::require(std::isfinite(c.sigma_y) && c.sigma_y >= 0.0, "curriculum: sigma_y must be nonnegative");
  }
}

inline FrequencyCurriculum fixed_curriculum(double tau) { FrequencyCurriculum c;
  c.tau_start = c.tau_end = tau;
  return c; }

inline FrequencyCurriculum data_dependent_curriculum(std::vector<double> spectrum, double sigma_y,
                                                     double tau_start = 0.0, double tau_end = 1.0,
                                                     NoiseReading reading = NoiseReading::squared) {
  FrequencyCurriculum c{FrequencyCurriculum::Kind::data_dependent, tau_start, tau_end, std::move(spectrum), sigma_y,
                        reading};
  validate(c);
  return c;
}

inline double diffusion_noise_power(double alpha_bar, NoiseReading reading) {
  if (alpha_bar <= 0.0) return std::numeric_limits<double>::infinity();
  const double ve = 1.0 / alpha_bar - 1.0;
  return reading == NoiseReading::squared ? ve * ve : ve;
}

// Returns tau as a fraction of the one-sided range, for low_pass_mask.
inline double cutoff_at(const FrequencyCurriculum& c, double u, std::optional<double> alpha_bar = std::nullopt) {
  validate(c);
  detail::require(std::isfinite(u) && u >= 0.0 && u <= 1.0, "cutoff_at: u must lie in [0, 1]");
  switch (c.kind) {
    case FrequencyCurriculum::Kind::fixed: return c.tau_end;
    case FrequencyCurriculum::Kind::linear: return c.tau_start + u * (c.tau_end - c.tau_start);
    case FrequencyCurriculum::Kind::exponential: return c.tau_end - (c.tau_end - c.tau_start) * std::exp(-5.0 * u);
    case FrequencyCurriculum::Kind::data_dependent: {
      if (!alpha_bar) throw InvalidConfiguration("data-dependent curriculum needs alpha_bar");
      const double threshold = std::max(c.sigma_y * c.sigma_y, diffusion_noise_power(*alpha_bar, c.reading));
      const auto& s = *c.spectrum;
      const std::size_t n = s.size();
      double tau = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        if (s[k] >= threshold) tau = std::max(tau, 2.0 * frequency_magnitude(k, n));
      }
      return std::clamp(tau, c.tau_start, c.tau_end);
    }
  }
  throw InvalidConfiguration("cutoff_at: unknown curriculum kind");
}

struct StepSizeSchedule {
  enum class Kind { cosine, fixed };

  Kind kind = Kind::cosine;
  double kappa_start = 1.0;  // kappa_T
  double kappa_end = 1.0;    // kappa_1
};

inline void validate(const StepSizeSchedule& s) {
  detail::require(std::isfinite(s.kappa_start) && std::isfinite(s.kappa_end) && s.kappa_start >= 0.0 &&
                      s.kappa_end >= 0.0,
                  "step size: kappa values must be nonnegative");
}

// fixed holds kappa_start throughout.
inline double kappa_at(const StepSizeSchedule& s, double u) {
  validate(s);
  detail::require(std::isfinite(u) && u >= 0.0 && u <= 1.0, "kappa_at: u must lie in [0, 1]");
  if (s.kind == StepSizeSchedule::Kind::fixed) return s.kappa_start;
  if (u == 0.0) return s.kappa_start;
  if (u == 1.0) return s.kappa_end;
  return 0.5 * (s.kappa_start + s.kappa_end) + 0.5 * (s.kappa_start - s.kappa_end) * std::cos(std::numbers::pi * u);
}

// ===== names for config files and CLI =====

inline const char* curriculum_name(FrequencyCurriculum::Kind k) {
  switch (k) {
    case FrequencyCurriculum::Kind::fixed: return "fixed";
    case FrequencyCurriculum::Kind::linear: return "linear";
    case FrequencyCurriculum::Kind::exponential: return "exponential";
    case FrequencyCurriculum::Kind::data_dependent: return "data";
  }
  return "unknown";
}

inline FrequencyCurriculum::Kind parse_curriculum_kind(const std::string& s) {
  if (s == "fixed") return FrequencyCurriculum::Kind::fixed;
  if (s == "linear") return FrequencyCurriculum::Kind::linear;
  if (s == "exponential") return FrequencyCurriculum::Kind::exponential;
  if (s == "data" || s == "data_dependent") return FrequencyCurriculum::Kind::data_dependent;
  throw InvalidParameter("unknown curriculum '" + s + "'");
}

inline const char* noise_reading_name(NoiseReading r) {
  return r == NoiseReading::squared ? "squared" : "ve";
}

inline NoiseReading parse_noise_reading(const std::string& s) {
  if (s == "squared") return NoiseReading::squared;
  if (s == "ve") return NoiseReading::variance_exploding;
  throw InvalidParameter("unknown noise reading '" + s + "' (expected squared or ve)");
}

inline const char* step_size_name(StepSizeSchedule::Kind k) {
  return k == StepSizeSchedule::Kind::cosine ? "cosine" : "fixed";
}

inline StepSizeSchedule::Kind parse_step_size_kind(const std::string& s) {
  if (s == "cosine") return StepSizeSchedule::Kind::cosine;
  if (s == "fixed") return StepSizeSchedule::Kind::fixed;
  throw InvalidParameter("unknown step-size schedule '" + s + "'");
}

}  // namespace fgps
