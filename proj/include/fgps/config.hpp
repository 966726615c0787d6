#pragma once

// Experiment configuration and its flat `key = value` text form.
// Lines starting with '#' are comments; lists are comma-separated.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fgps/error.hpp"
#include "fgps/operators.hpp"
#include "fgps/schedules.hpp"
#include "fgps/spectral_prior.hpp"

namespace fgps {

struct ExperimentConfig {
  // prior
  double c = 1.0;
  double beta = 2.5;
  std::size_t n = 256;
  std::optional<double> dc_power;  // empty: S(f_1)

  // operators: every kind in `operators`, crossed with kernel_sigmas for the
  // gaussian and highpass kinds
  std::vector<std::string> operators{"highpass"};
  std::vector<double> kernel_sigmas{5.0};
  std::size_t box_width = 8;
  double haze_light = 1.0;
  double haze_scattering = 1.0;
  double sigma_y = 1.0;

  // diffusion
  std::size_t T = 200;
  double beta_min = kDefaultBetaMin;
  std::optional<double> beta_max;  // empty: 0.02 * 1000 / T

  // guidance
  FrequencyCurriculum::Kind curriculum = FrequencyCurriculum::Kind::data_dependent;
  double tau_start = 0.0;
  double tau_end = 1.0;
  NoiseReading noise_reading = NoiseReading::squared;
  StepSizeSchedule::Kind step_size = StepSizeSchedule::Kind::cosine;
  double kappa_start = 1.0;
  double kappa_end = 1.0;
  bool theoretical_st = false;
  bool guide_last_step = true;
  std::vector<std::string> methods{"dps", "fgps"};

  // run
  std::size_t count = 1000;
  std::size_t trials = 50;
  std::size_t grid = 50;
  std::uint64_t seed = 42;
  std::size_t threads = 0;
  bool timing = false;
  std::string out;
  std::string plot;
  std::string trajectory;

  bool operator==(const ExperimentConfig&) const = default;
};

enum class Subcommand { gap_sweep, restore_bench, sample, check };

inline ExperimentConfig defaults_for(Subcommand sub) {
  ExperimentConfig cfg;
  switch (sub) {
    case Subcommand::gap_sweep:
    case Subcommand::check:
      cfg.operators = {"highpass", "gaussian"};
      cfg.kernel_sigmas = {2.0, 3.0, 5.0};
      cfg.sigma_y = 1.0;
      cfg.curriculum = FrequencyCurriculum::Kind::data_dependent;
      cfg.tau_start = 0.0;
      cfg.tau_end = 1.0;
      cfg.methods = {"dps", "fgps"};
      break;
    case Subcommand::restore_bench:
    case Subcommand::sample:
      cfg.operators = {"highpass"};
      cfg.kernel_sigmas = {5.0};
      cfg.sigma_y = presets::kRestorationNoise;
      cfg.curriculum = FrequencyCurriculum::Kind::linear;
      cfg.tau_start = 10.0 / 256.0;
      cfg.tau_end = 75.0 / 256.0;
      cfg.step_size = StepSizeSchedule::Kind::cosine;
      cfg.kappa_start = 5.1;
      cfg.kappa_end = 1.1;
      cfg.methods = sub == Subcommand::sample ? std::vector<std::string>{"fgps"}
                                              : std::vector<std::string>{"dps", "fgps", "ilvr", "none",
                                                                         "posterior-mean"};
      break;
  }
  return cfg;
}

// Full-size synthetic protocol: n = 2000, 10^4 signals, T = 1000.
inline void apply_full_scale(ExperimentConfig& cfg) {
  cfg.n = 2000;
  cfg.count = 10000;
  cfg.T = 1000;
  cfg.beta_max.reset();
}

// ===== derived objects =====

inline PowerLawSpectrum spectrum_of(const ExperimentConfig& cfg) {
  return make_power_law_spectrum(cfg.c, cfg.beta, cfg.n, cfg.dc_power);
}

inline VarianceSchedule schedule_of(const ExperimentConfig& cfg) {
  return ddpm_variance_schedule(cfg.T, cfg.beta_min, cfg.beta_max.value_or(rescaled_beta_max(cfg.T)));
}

inline std::vector<OperatorDescriptor> operator_descriptors(const ExperimentConfig& cfg) {
  std::vector<OperatorDescriptor> out;
  for (const auto& name : cfg.operators) {
    OperatorDescriptor d;
    d.kind = parse_kind(name);
    d.n = cfg.n;
    switch (d.kind) {
      case OperatorDescriptor::Kind::gaussian:
      case OperatorDescriptor::Kind::highpass:
        if (cfg.kernel_sigmas.empty()) throw InvalidConfiguration("operator '" + name + "' needs a kernel sigma");
        for (double s : cfg.kernel_sigmas) {
          d.sigma = s;
          out.push_back(d);
        }
        break;
      case OperatorDescriptor::Kind::box:
        d.width = cfg.box_width;
        out.push_back(d);
        break;
      case OperatorDescriptor::Kind::haze:
        d.light = cfg.haze_light;
        d.scattering = cfg.haze_scattering;
        out.push_back(d);
        break;
      case OperatorDescriptor::Kind::identity: out.push_back(d); break;
    }
  }
  if (out.empty()) throw InvalidConfiguration("no operators configured");
  return out;
}

inline FrequencyCurriculum curriculum_of(const ExperimentConfig& cfg, const StationaryGaussianPrior& prior) {
  FrequencyCurriculum c;
  c.kind = cfg.curriculum;
  c.tau_start = cfg.tau_start;
  c.tau_end = cfg.tau_end;
  c.reading = cfg.noise_reading;
  c.sigma_y = cfg.sigma_y;
  if (c.kind == FrequencyCurriculum::Kind::data_dependent) {
    c.spectrum = std::vector<double>(prior.eigenvalues().begin(), prior.eigenvalues().end());
  }
  validate(c);
  return c;
}

inline StepSizeSchedule step_size_of(const ExperimentConfig& cfg) {
  StepSizeSchedule s{cfg.step_size, cfg.kappa_start, cfg.kappa_end};
  validate(s);
  return s;
}

// Checks every downstream precondition by building the derived objects.
inline void validate(const ExperimentConfig& cfg) {
  try {
    const auto prior = build_prior(spectrum_of(cfg));
    (void)schedule_of(cfg);
    for (const auto& d : operator_descriptors(cfg)) (void)make_operator(d);
    (void)curriculum_of(cfg, prior);
    (void)step_size_of(cfg);
  } catch (const InvalidParameter& e) {
    throw InvalidConfiguration(e.what());
  }
  detail::require(std::isfinite(cfg.sigma_y) && cfg.sigma_y >= 0.0, "sigma_y must be nonnegative");
  if (cfg.count < 1) throw InvalidConfiguration("count must be positive");
  if (cfg.trials < 1) throw InvalidConfiguration("trials must be positive");
  if (cfg.grid < 1) throw InvalidConfiguration("grid must be positive");
  if (cfg.methods.empty()) throw InvalidConfiguration("no methods configured");
}

// ===== text form =====

namespace detail {

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::logic_error&) {
    throw InvalidConfiguration("config: '" + key + "' expects a number, got '" + v + "'");
  }
}

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const auto u = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return u;
  } catch (const std::logic_error&) {
    throw InvalidConfiguration("config: '" + key + "' expects a nonnegative integer, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidConfiguration("config: '" + key + "' expects true or false, got '" + v + "'");
}

}  // namespace detail

inline std::string to_text(const ExperimentConfig& cfg) {
  using detail::fmt_double;
  std::vector<std::string> sigmas;
  for (double s : cfg.kernel_sigmas) sigmas.push_back(fmt_double(s));
  std::ostringstream o;
  o << "c = " << fmt_double(cfg.c) << "\n"
    << "beta = " << fmt_double(cfg.beta) << "\n"
    << "n = " << cfg.n << "\n"
    << "dc_power = " << (cfg.dc_power ? fmt_double(*cfg.dc_power) : "auto") << "\n"
    << "operator = " << detail::join(cfg.operators) << "\n"
    << "kernel_sigma = " << detail::join(sigmas) << "\n"
    << "box_width = " << cfg.box_width << "\n"
    << "haze_light = " << fmt_double(cfg.haze_light) << "\n"
    << "haze_scattering = " << fmt_double(cfg.haze_scattering) << "\n"
    << "sigma_y = " << fmt_double(cfg.sigma_y) << "\n"
    << "T = " << cfg.T << "\n"
    << "beta_min = " << fmt_double(cfg.beta_min) << "\n"
    << "beta_max = " << (cfg.beta_max ? fmt_double(*cfg.beta_max) : "auto") << "\n"
    << "curriculum = " << curriculum_name(cfg.curriculum) << "\n"
    << "tau_start = " << fmt_double(cfg.tau_start) << "\n"
    << "tau_end = " << fmt_double(cfg.tau_end) << "\n"
    << "noise_reading = " << noise_reading_name(cfg.noise_reading) << "\n"
    << "step_size = " << step_size_name(cfg.step_size) << "\n"
    << "kappa_start = " << fmt_double(cfg.kappa_start) << "\n"
    << "kappa_end = " << fmt_double(cfg.kappa_end) << "\n"
    << "theoretical_st = " << (cfg.theoretical_st ? "true" : "false") << "\n"
    << "guide_last_step = " << (cfg.guide_last_step ? "true" : "false") << "\n"
    << "method = " << detail::join(cfg.methods) << "\n"
    << "count = " << cfg.count << "\n"
    << "trials = " << cfg.trials << "\n"
    << "grid = " << cfg.grid << "\n"
    << "seed = " << cfg.seed << "\n"
    << "threads = " << cfg.threads << "\n"
    << "timing = " << (cfg.timing ? "true" : "false") << "\n"
    << "out = " << cfg.out << "\n"
    << "plot = " << cfg.plot << "\n"
    << "trajectory = " << cfg.trajectory << "\n";
  return o.str();
}

// Applies one key to cfg. Shared by the file parser and the CLI.
inline void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& raw) {
  using namespace detail;
  const std::string v = trim(raw);
  auto optional_double = [&](std::optional<double>& slot) {
    if (v == "auto") {
      slot.reset();
    } else {
      slot = parse_double(key, v);
    }
  };
  try {
    if (key == "c") cfg.c = parse_double(key, v);
    else if (key == "beta") cfg.beta = parse_double(key, v);
    else if (key == "n") cfg.n = parse_unsigned(key, v);
    else if (key == "dc_power") optional_double(cfg.dc_power);
    else if (key == "operator") cfg.operators = split_list(v);
    else if (key == "kernel_sigma") {
      cfg.kernel_sigmas.clear();
      for (const auto& s : split_list(v)) cfg.kernel_sigmas.push_back(parse_double(key, s));
    } else if (key == "box_width") cfg.box_width = parse_unsigned(key, v);
    else if (key == "haze_light") cfg.haze_light = parse_double(key, v);
    else if (key == "haze_scattering") cfg.haze_scattering = parse_double(key, v);
    else if (key == "sigma_y") cfg.sigma_y = parse_double(key, v);
    else if (key == "T") cfg.T = parse_unsigned(key, v);
    else if (key == "beta_min") cfg.beta_min = parse_double(key, v);
    else if (key == "beta_max") optional_double(cfg.beta_max);
    else if (key == "curriculum") cfg.curriculum = parse_curriculum_kind(v);
    else if (key == "tau_start") cfg.tau_start = parse_double(key, v);
    else if (key == "tau_end") cfg.tau_end = parse_double(key, v);
    else if (key == "noise_reading") cfg.noise_reading = parse_noise_reading(v);
    else if (key == "step_size") cfg.step_size = parse_step_size_kind(v);
    else if (key == "kappa_start") cfg.kappa_start = parse_double(key, v);
    else if (key == "kappa_end") cfg.kappa_end = parse_double(key, v);
    else if (key == "theoretical_st") cfg.theoretical_st = parse_bool(key, v);
    else if (key == "guide_last_step") cfg.guide_last_step = parse_bool(key, v);
    else if (key == "method") cfg.methods = split_list(v);
    else if (key == "count") cfg.count = parse_unsigned(key, v);
    else if (key == "trials") cfg.trials = parse_unsigned(key, v);
    else if (key == "grid") cfg.grid = parse_unsigned(key, v);
    else if (key == "seed") cfg.seed = parse_unsigned(key, v);
    else if (key == "threads") cfg.threads = parse_unsigned(key, v);
    else if (key == "timing") cfg.timing = parse_bool(key, v);
    else if (key == "out") cfg.out = v;
    else if (key == "plot") cfg.plot = v;
    else if (key == "trajectory") cfg.trajectory = v;
    else throw InvalidConfiguration("config: unknown key '" + key + "'");
  } catch (const InvalidParameter& e) {
    throw InvalidConfiguration(std::string("config: ") + e.what());
  }
}

// Applies every `key = value` line of `text` on top of `base`.
inline ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {}) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = detail::trim(line);
    if (trimmed.empty() || trimmed[0] == '#') continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw InvalidConfiguration("config line " + std::to_string(line_no) + ": expected key = value");
    }
    set_config_value(base, detail::trim(trimmed.substr(0, eq)), trimmed.substr(eq + 1));
  }
  return base;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str(), std::move(base));
  } catch (const InvalidConfiguration& e) {
    throw InvalidConfiguration(path + ": " + e.what());
  }
}

}  // namespace fgps
