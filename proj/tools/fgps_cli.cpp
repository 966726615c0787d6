// fgps: command-line driver for gap sweeps, restoration benchmarks, single
// guided samples and the self-check suite.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "fgps/config.hpp"
#include "fgps/harness.hpp"
#include "fgps/oracle_suite.hpp"
#include "fgps/reports.hpp"
#include "fgps/signal_io.hpp"

namespace {

struct FlagSpec {
  const char* flag;
  const char* key;
  const char* help;
};

// Value flags, each mapped onto a config key. Anything given on the command
// line overrides the config file.
constexpr FlagSpec kValueFlags[] = {
    {"--n", "n", "Signal length"},
    {"--count", "count", "Ensemble size for gap sweeps"},
    {"--beta", "beta", "Power-law decay exponent"},
    {"--c", "c", "Power-law scale"},
    {"--dc-power", "dc_power", "Power of the zero-frequency bin, or 'auto' for S(f_1)"},
    {"--sigma-y", "sigma_y", "Measurement noise standard deviation"},
    {"--operator", "operator", "Operator kind(s): gaussian, highpass, box, haze, identity (comma list)"},
    {"--kernel-sigma", "kernel_sigma", "Kernel width(s) for gaussian/highpass (comma list)"},
    {"--box-width", "box_width", "Width of the directional box kernel"},
    {"--haze-light", "haze_light", "Atmospheric light L"},
    {"--haze-scattering", "haze_scattering", "Scattering coefficient"},
    {"--T", "T", "Number of diffusion steps"},
    {"--beta-min", "beta_min", "First noise rate of the linear schedule"},
    {"--beta-max", "beta_max", "Last noise rate, or 'auto' for 0.02*1000/T"},
    {"--curriculum", "curriculum", "Frequency curriculum: fixed, linear, exponential, data"},
    {"--tau-start", "tau_start", "Cutoff at the start of the reverse process"},
    {"--tau-end", "tau_end", "Cutoff at the end of the reverse process"},
    {"--noise-reading", "noise_reading", "Data curriculum noise power: squared or ve"},
    {"--step-size", "step_size", "Step-size schedule: cosine or fixed"},
    {"--kappa-start", "kappa_start", "Step size at the start of the reverse process"},
    {"--kappa-end", "kappa_end", "Step size at the end of the reverse process"},
    {"--method", "method", "Method(s): dps, fgps, ilvr, none, posterior-mean (comma list)"},
    {"--trials", "trials", "Benchmark trials"},
    {"--grid", "grid", "Number of timesteps in a sweep"},
    {"--seed", "seed", "PRNG seed"},
    {"--threads", "threads", "Worker threads (0: hardware concurrency)"},
    {"--out", "out", "Output CSV path (default: stdout)"},
    {"--plot", "plot", "Output SVG plot path (gap-sweep)"},
    {"--trajectory", "trajectory", "Binary trajectory output path (sample)"},
};

struct SwitchSpec {
  const char* flag;
  const char* key;
  const char* value;
  const char* help;
};

constexpr SwitchSpec kSwitches[] = {
    {"--theoretical-st", "theoretical_st", "true", "Use the exact pass-band step scaling"},
    {"--no-last-step-guidance", "guide_last_step", "false", "Skip guidance on the final step"},
    {"--timing", "timing", "true", "Record wall time per method (breaks byte-identical reruns)"},
};

struct Invocation {
  std::map<std::string, std::string> values;
  std::map<std::string, bool> switches;
  std::string config_path;
  bool full_scale = false;
  bool quick = false;
};

void add_common_options(CLI::App* sub, Invocation& inv) {
  for (const auto& f : kValueFlags) sub->add_option(f.flag, inv.values[f.key], f.help);
  for (const auto& s : kSwitches) sub->add_flag(s.flag, inv.switches[s.key], s.help);
  sub->add_option("--config", inv.config_path, "key = value config file")->check(CLI::ExistingFile);
  sub->add_flag("--full-scale", inv.full_scale, "n=2000, count=10000, T=1000");
}

fgps::ExperimentConfig resolve(fgps::Subcommand which, const CLI::App* sub, const Invocation& inv) {
  auto cfg = fgps::defaults_for(which);
  if (inv.full_scale) fgps::apply_full_scale(cfg);
  if (!inv.config_path.empty()) cfg = fgps::load_config(inv.config_path, cfg);
  for (const auto& f : kValueFlags) {
    if (sub->count(f.flag) > 0) fgps::set_config_value(cfg, f.key, inv.values.at(f.key));
  }
  for (const auto& s : kSwitches) {
    if (sub->count(s.flag) > 0) fgps::set_config_value(cfg, s.key, s.value);
  }
  return cfg;
}

// Outputs written so far; removed if a later step fails.
class OutputSet {
 public:
  void write(const std::string& path, const std::string& content) {
    fgps::write_file_atomic(path, content);
    written_.push_back(path);
  }
  void write_signals(const std::string& path, const fgps::SignalEnsemble& e) { write(path, fgps::encode_signals(e)); }
  void discard() {
    for (const auto& p : written_) {
      std::error_code ec;
      std::filesystem::remove(p, ec);
    }
    written_.clear();
  }

 private:
  std::vector<std::string> written_;
};

void emit(OutputSet& outputs, const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
  } else {
    outputs.write(path, content);
  }
}

int run_gap_sweep(const fgps::ExperimentConfig& cfg, OutputSet& outputs) {
  const auto report = fgps::run_gap_sweep(cfg);
  emit(outputs, cfg.out, fgps::emit_csv(report));
  if (!cfg.plot.empty()) outputs.write(cfg.plot, fgps::emit_plot(report));
  return 0;
}

int run_restore_bench(const fgps::ExperimentConfig& cfg, OutputSet& outputs) {
  if (!cfg.plot.empty()) throw fgps::InvalidConfiguration("--plot is only available for gap-sweep");
  const auto report = fgps::run_restoration_bench(cfg);
  emit(outputs, cfg.out, fgps::emit_csv(report));
  std::map<std::string, std::pair<double, std::size_t>> totals;
  for (const auto& r : report.rows) {
    auto& [sum, count] = totals[r.method];
    sum += r.mse_truth;
    ++count;
  }
  for (const auto& [method, t] : totals) {
    std::fprintf(stderr, "%-16s mean MSE to truth %.6g over %zu trials\n", method.c_str(),
                 t.first / static_cast<double>(t.second), t.second);
  }
  return 0;
}

int run_sample(const fgps::ExperimentConfig& cfg, OutputSet& outputs) {
  if (!cfg.plot.empty()) throw fgps::InvalidConfiguration("--plot is only available for gap-sweep");
  const auto result = fgps::run_sample(cfg);
  emit(outputs, cfg.out, fgps::emit_sample_csv(result));
  if (!cfg.trajectory.empty()) {
    if (result.trajectory.steps.empty()) throw fgps::InvalidConfiguration("method records no trajectory");
    outputs.write_signals(cfg.trajectory, fgps::trajectory_signals(result.trajectory));
  }
  return 0;
}

int run_check(bool quick) {
  const auto results = fgps::oracle::run_all(quick);
  std::size_t failed = 0;
  for (const auto& r : results) {
    std::printf("%s %s%s%s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.empty() ? "" : "  ",
                r.detail.c_str());
    if (!r.passed) ++failed;
  }
  std::printf("%zu/%zu checks passed\n", results.size() - failed, results.size());
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency-guided posterior sampling on Gaussian power-law priors"};
  app.require_subcommand(1);

  Invocation gap_inv, bench_inv, sample_inv, check_inv;
  auto* gap = app.add_subcommand("gap-sweep", "Exact approximation gaps across diffusion steps");
  auto* bench = app.add_subcommand("restore-bench", "Restoration benchmark against the exact posterior");
  auto* sample = app.add_subcommand("sample", "Run one guided sampler and print the estimate");
  auto* check = app.add_subcommand("check", "Run the oracle and invariant suite");
  add_common_options(gap, gap_inv);
  add_common_options(bench, bench_inv);
  add_common_options(sample, sample_inv);
  check->add_flag("--quick", check_inv.quick, "Smaller Monte-Carlo and ensemble sizes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code != 0) std::cerr << "\n" << app.help();
    return code;
  }

  OutputSet outputs;
  CLI::App* active = nullptr;
  try {
    if (*check) return run_check(check_inv.quick);
    if (*gap) {
      active = gap;
      const auto cfg = resolve(fgps::Subcommand::gap_sweep, gap, gap_inv);
      return run_gap_sweep(cfg, outputs);
    }
    if (*bench) {
      active = bench;
      const auto cfg = resolve(fgps::Subcommand::restore_bench, bench, bench_inv);
      return run_restore_bench(cfg, outputs);
    }
    if (*sample) {
      active = sample;
      const auto cfg = resolve(fgps::Subcommand::sample, sample, sample_inv);
      return run_sample(cfg, outputs);
    }
  } catch (const fgps::Error& e) {
    outputs.discard();
    std::cerr << "error: " << e.what() << "\n\n" << (active ? active->help() : app.help());
    return 2;
  } catch (const std::exception& e) {
    outputs.discard();
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
