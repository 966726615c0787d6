#pragma once

// Experiment drivers behind the CLI: gap sweeps, the restoration benchmark
// and single guided samples.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fgps/analytic_scores.hpp"
#include "fgps/config.hpp"
#include "fgps/operators.hpp"
#include "fgps/parallel.hpp"
#include "fgps/reports.hpp"
#include "fgps/samplers.hpp"
#include "fgps/schedules.hpp"
#include "fgps/spectral_prior.hpp"

namespace fgps {

// `points` evenly spaced steps in [1, T], rounded, deduplicated, ascending.
inline std::vector<std::size_t> timestep_grid(std::size_t T, std::size_t points) {
  detail::require(T >= 1 && points >= 1, "timestep_grid: need T >= 1 and points >= 1");
  std::vector<std::size_t> grid;
  if (points == 1) return {T};
  for (std::size_t j = 0; j < points; ++j) {
    const double t = 1.0 + static_cast<double>(j) * static_cast<double>(T - 1) / static_cast<double>(points - 1);
    const auto step = static_cast<std::size_t>(std::llround(t));
    if (grid.empty() || grid.back() != step) grid.push_back(step);
  }
  return grid;
}

struct GapSweepInputs {
  StationaryGaussianPrior prior;
  VarianceSchedule schedule;
  std::vector<OperatorDescriptor> operators;
  FrequencyCurriculum curriculum;
  std::vector<std::size_t> grid;
  std::vector<std::string> methods;
};

inline GapSweepInputs gap_sweep_inputs(const ExperimentConfig& cfg) {
  validate(cfg);
  auto prior = build_prior(spectrum_of(cfg));
  auto curriculum = curriculum_of(cfg, prior);
  for (const auto& m : cfg.methods) {
    if (m != "dps" && m != "fgps") throw InvalidConfiguration("gap sweep supports methods dps and fgps, got '" + m + "'");
  }
  return {std::move(prior), schedule_of(cfg), operator_descriptors(cfg), std::move(curriculum),
          timestep_grid(cfg.T, cfg.grid), cfg.methods};
}

// Each (operator, t) cell evaluates the analytic gaps on the full ensemble.
// Signal i uses x0_i from the shared ensemble, measurement noise from
// derive_seed(seed, {kMeasurement, i}) and diffusion noise from
// derive_seed(seed, {kForwardNoise, t, i}).
inline GapReport run_gap_sweep(const ExperimentConfig& cfg) {
  const auto in = gap_sweep_inputs(cfg);
  const std::size_t n = cfg.n, count = cfg.count;
  const auto ensemble = sample_prior(in.prior, count, cfg.seed, cfg.threads);

  std::vector<ForwardOperator> ops;
  std::vector<SignalEnsemble> measurements;
  for (const auto& d : in.operators) {
    ops.push_back(make_operator(d));
    SignalEnsemble ys(count, n, cfg.seed);
    for (std::size_t i = 0; i < count; ++i) {
      const auto m = measure(ops.back(), ensemble.row(i), cfg.sigma_y, derive_seed(cfg.seed, {stream::kMeasurement, i}));
      std::copy(m.y.begin(), m.y.end(), ys.row(i).begin());
    }
    measurements.push_back(std::move(ys));
  }

  const std::size_t cells = ops.size() * in.grid.size();
  std::vector<std::vector<GapRow>> results(cells);
  parallel_for(
      cells,
      [&](std::size_t cell) {
        const std::size_t oi = cell / in.grid.size();
        const std::size_t t = in.grid[cell % in.grid.size()];
        const double ab = in.schedule.alpha_bar_at(t);
        const double u = cfg.T >= 2 ? progress(t, cfg.T) : 1.0;
        const FrequencyMask mask = low_pass_mask(n, cutoff_at(in.curriculum, u, ab));
        std::vector<std::vector<double>> norms(in.methods.size(), std::vector<double>(count));
        std::vector<double> x_t(n), eps(n);
        for (std::size_t i = 0; i < count; ++i) {
          Rng rng(derive_seed(cfg.seed, {stream::kForwardNoise, t, i}));
          fill_standard_normal(rng, eps);
          const auto x0 = ensemble.row(i);
          for (std::size_t j = 0; j < n; ++j) x_t[j] = std::sqrt(ab) * x0[j] + std::sqrt(1.0 - ab) * eps[j];
          const auto y = measurements[oi].row(i);
          for (std::size_t mi = 0; mi < in.methods.size(); ++mi) {
            const auto gap = in.methods[mi] == "dps" ? dps_gap(in.prior, ops[oi], cfg.sigma_y, ab, x_t, y)
                                                     : fgps_gap(in.prior, ops[oi], cfg.sigma_y, ab, x_t, y, mask);
            norms[mi][i] = detail::l2_norm(gap);
          }
        }
        const auto& d = in.operators[oi];
        const bool has_sigma =
            d.kind == OperatorDescriptor::Kind::gaussian || d.kind == OperatorDescriptor::Kind::highpass;
        for (std::size_t mi = 0; mi < in.methods.size(); ++mi) {
          double sum = 0.0;
          for (double v : norms[mi]) sum += v;
          const double mean = sum / static_cast<double>(count);
          double ss = 0.0;
          for (double v : norms[mi]) ss += (v - mean) * (v - mean);
          const double sd = count > 1 ? std::sqrt(ss / static_cast<double>(count - 1)) : 0.0;
          results[cell].push_back({t, ab, kind_name(d.kind), has_sigma ? d.sigma : 0.0, in.methods[mi], mean,
                                   mean / std::sqrt(static_cast<double>(n)), sd, count});
        }
      },
      cfg.threads);

  GapReport report;
  for (auto& rows : results) {
    for (auto& r : rows) report.rows.push_back(std::move(r));
  }
  sort_rows(report);
  return report;
}

inline BenchmarkSettings benchmark_settings(const ExperimentConfig& cfg, const StationaryGaussianPrior& prior) {
  BenchmarkSettings s;
  s.schedule = schedule_of(cfg);
  s.curriculum = curriculum_of(cfg, prior);
  s.step_size = step_size_of(cfg);
  s.use_theoretical_St = cfg.theoretical_st;
  s.guide_last_step = cfg.guide_last_step;
  s.timing = cfg.timing;
  s.threads = cfg.threads;
  return s;
}

// Uses the first configured operator.
inline RestorationReport run_restoration_bench(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto prior = build_prior(spectrum_of(cfg));
  const auto op = make_operator(operator_descriptors(cfg).front());
  std::vector<RestorationMethod> methods;
  for (const auto& m : cfg.methods) methods.push_back(parse_restoration_method(m));
  return posterior_benchmark(prior, op, cfg.sigma_y, methods, cfg.trials, cfg.seed, benchmark_settings(cfg, prior));
}

struct SampleResult {
  TrialData trial;
  std::vector<double> x_hat;
  std::vector<double> posterior_mean;
  Trajectory trajectory;
};

// One guided sample on trial 0 of the benchmark stream, first method only.
inline SampleResult run_sample(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto prior = build_prior(spectrum_of(cfg));
  const auto op = make_operator(operator_descriptors(cfg).front());
  const auto method = parse_restoration_method(cfg.methods.front());
  const auto settings = benchmark_settings(cfg, prior);
  SampleResult out;
  out.trial = make_trial(prior, op, cfg.sigma_y, cfg.seed, 0);
  out.posterior_mean = exact_posterior(prior, op, cfg.sigma_y, out.trial.measurement.y).mean;
  if (method == RestorationMethod::posterior_mean) {
    out.x_hat = out.posterior_mean;
    return out;
  }
  GuidanceConfig g;
  g.method = parse_guidance_method(cfg.methods.front());
  g.curriculum = settings.curriculum;
  g.step_size = settings.step_size;
  g.use_theoretical_St = cfg.theoretical_st;
  g.guide_last_step = cfg.guide_last_step;
  g.record = !cfg.trajectory.empty();
  const AnalyticGaussianScore model(prior);
  out.trajectory = guided_sample(out.trial.measurement, op, model, settings.schedule, g, out.trial.sampler_seed);
  out.x_hat = out.trajectory.x0;
  return out;
}

inline std::string emit_sample_csv(const SampleResult& r) {
  std::string out = std::string(kSampleHeader) + "\n";
  for (std::size_t i = 0; i < r.x_hat.size(); ++i) {
    out += std::to_string(i) + "," + detail::fmt_double(r.trial.x0[i]) + "," +
           detail::fmt_double(r.trial.measurement.y[i]) + "," + detail::fmt_double(r.x_hat[i]) + "," +
           detail::fmt_double(r.posterior_mean[i]) + "\n";
  }
  return out;
}

}  // namespace fgps
