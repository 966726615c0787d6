#pragma once

// Reverse-diffusion samplers: unconditional DDPM ancestral sampling and the
// guided loop with DPS, FGPS and ILVR-style guidance.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fgps/analytic_scores.hpp"
#include "fgps/error.hpp"
#include "fgps/operators.hpp"
#include "fgps/parallel.hpp"
#include "fgps/random.hpp"
#include "fgps/schedules.hpp"
#include "fgps/spectral_prior.hpp"

namespace fgps {

struct DiffusionTime {
  std::size_t step = 0;
  double alpha_bar = 1.0;
};

class ScoreModel {
 public:
  virtual ~ScoreModel() = default;
  virtual std::size_t size() const = 0;
  virtual std::vector<double> score(std::span<const double> x_t, DiffusionTime time) const = 0;
  // (d mu_{0|t} / d x_t)^T v, if the model can supply it exactly.
  virtual std::optional<std::vector<double>> tweedie_vjp(std::span<const double> /*x_t*/, DiffusionTime /*time*/,
                                                         std::span<const double> /*v*/) const {
    return std::nullopt;
  }
};

inline std::vector<double> tweedie_from_score(std::span<const double> x_t, std::span<const double> score,
                                              double alpha_bar) {
  detail::require(std::isfinite(alpha_bar) && alpha_bar > 0.0 && alpha_bar <= 1.0,
                  "tweedie: alpha_bar must lie in (0, 1]");
  detail::require_size(score.size(), x_t.size(), "score");
  std::vector<double> mu(x_t.size());
  const double scale = 1.0 / std::sqrt(alpha_bar);
  for (std::size_t i = 0; i < mu.size(); ++i) mu[i] = (x_t[i] + (1.0 - alpha_bar) * score[i]) * scale;
  return mu;
}

inline std::vector<double> tweedie_estimate(const ScoreModel& model, std::span<const double> x_t, DiffusionTime time) {
  detail::require(std::isfinite(time.alpha_bar) && time.alpha_bar > 0.0 && time.alpha_bar <= 1.0,
                  "tweedie: alpha_bar must lie in (0, 1]");
  return tweedie_from_score(x_t, model.score(x_t, time), time.alpha_bar);
}

// Central-difference Jacobian-transpose product of the Tweedie map:
// component i is (v . mu(x + h e_i) - v . mu(x - h e_i)) / 2h. Slow; for
// models without an exact product.
inline std::vector<double> numeric_tweedie_vjp(const ScoreModel& model, std::span<const double> x_t,
                                               DiffusionTime time, std::span<const double> v, double h = 1e-5) {
  detail::require_size(v.size(), x_t.size(), "vjp");
  std::vector<double> out(x_t.size());
  std::vector<double> probe(x_t.begin(), x_t.end());
  auto dot_mu = [&] {
    const auto mu = tweedie_estimate(model, probe, time);
    double acc = 0.0;
    for (std::size_t j = 0; j < mu.size(); ++j) acc += v[j] * mu[j];
    return acc;
  };
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    probe[i] = x_t[i] + h;
    const double plus = dot_mu();
    probe[i] = x_t[i] - h;
    const double minus = dot_mu();
    probe[i] = x_t[i];
    out[i] = (plus - minus) / (2.0 * h);
  }
  return out;
}

// Exact score of the diffused Gaussian prior.
class AnalyticGaussianScore final : public ScoreModel {
 public:
  explicit AnalyticGaussianScore(StationaryGaussianPrior prior) : prior_(std::move(prior)) {}

  std::size_t size() const override { return prior_.size(); }
  const StationaryGaussianPrior& prior() const { return prior_; }

  std::vector<double> score(std::span<const double> x_t, DiffusionTime time) const override {
    return unconditional_score(prior_, time.alpha_bar, x_t);
  }

  // The Tweedie map is mu = Gamma x_t with Gamma symmetric.
  std::optional<std::vector<double>> tweedie_vjp(std::span<const double> /*x_t*/, DiffusionTime time,
                                                 std::span<const double> v) const override {
    return detail::multiply_spectrum(tweedie_gamma(prior_, time.alpha_bar), v);
  }

 private:
  StationaryGaussianPrior prior_;
};

// Coefficients of the ancestral step x' = c_x x_t + c_mu mu + sigma z.
struct StepCoefficients {
  double c_x = 0.0;
  double c_mu = 0.0;
  double sigma = 0.0;
};

inline StepCoefficients step_coefficients(const VarianceSchedule& schedule, std::size_t t) {
  detail::require(t >= 1 && t <= schedule.T, "ddpm_step: t must lie in [1, T]");
  const double ab = schedule.alpha_bar_at(t);
  const double ab_prev = schedule.alpha_bar_at(t - 1);
  const double alpha = schedule.alpha_at(t);
  StepCoefficients c;
  c.c_x = std::sqrt(alpha) * (1.0 - ab_prev) / (1.0 - ab);
  c.c_mu = std::sqrt(ab_prev) * (1.0 - alpha) / (1.0 - ab);
  c.sigma = schedule.sigma_tilde_at(t);
  return c;
}

inline std::vector<double> ddpm_step(std::span<const double> x_t, std::span<const double> mu_0t,
                                     const VarianceSchedule& schedule, std::size_t t, std::span<const double> noise) {
  detail::require_size(mu_0t.size(), x_t.size(), "ddpm_step mu");
  detail::require_size(noise.size(), x_t.size(), "ddpm_step noise");
  const auto c = step_coefficients(schedule, t);
  std::vector<double> out(x_t.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c.c_x * x_t[i] + c.c_mu * mu_0t[i] + c.sigma * noise[i];
  return out;
}

enum class GuidanceMethod { none, dps, fgps, ilvr };

inline const char* method_name(GuidanceMethod m) {
  switch (m) {
    case GuidanceMethod::none: return "none";
    case GuidanceMethod::dps: return "dps";
    case GuidanceMethod::fgps: return "fgps";
    case GuidanceMethod::ilvr: return "ilvr";
  }
  return "unknown";
}

inline GuidanceMethod parse_guidance_method(const std::string& s) {
  if (s == "none") return GuidanceMethod::none;
  if (s == "dps") return GuidanceMethod::dps;
  if (s == "fgps") return GuidanceMethod::fgps;
  if (s == "ilvr") return GuidanceMethod::ilvr;
  throw InvalidParameter("unknown guidance method '" + s + "'");
}

struct GuidanceConfig {
  GuidanceMethod method = GuidanceMethod::none;
  FrequencyCurriculum curriculum;  // fgps only
  StepSizeSchedule step_size;
  // Exact S_t = (sy^2 C C^T)^+ instead of kappa / ||residual||.
  bool use_theoretical_St = false;
  bool guide_last_step = true;
  bool record = false;
};

struct TrajectoryStep {
  std::size_t t = 0;
  std::vector<double> x_t;
  std::vector<double> mu;
  double residual_norm = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  std::vector<double> x0;
};

// Rows are the recorded x_t, in reverse-time order.
inline SignalEnsemble trajectory_signals(const Trajectory& trajectory) {
  detail::require(!trajectory.steps.empty(), "trajectory has no recorded steps");
  SignalEnsemble out(trajectory.steps.size(), trajectory.steps.front().x_t.size());
  for (std::size_t i = 0; i < trajectory.steps.size(); ++i) {
    std::copy(trajectory.steps[i].x_t.begin(), trajectory.steps[i].x_t.end(), out.row(i).begin());
  }
  return out;
}

namespace detail {

inline double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

inline void require_finite(std::span<const double> v, std::size_t t, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericalDegeneracy(std::string("guided_sample: non-finite ") + what + " at t=" + std::to_string(t));
    }
  }
}

}  // namespace detail

struct GuidanceGradient {
  std::vector<double> grad;  // grad_{x_t} ||M(y - A(mu(x_t)))||^2
  double residual_norm = 0.0;
};

inline GuidanceGradient guidance_gradient(const ForwardOperator& op, const ScoreModel& model,
                                          std::span<const double> x_t, DiffusionTime time,
                                          std::span<const double> y, const FrequencyMask& mask) {
  const std::size_t n = x_t.size();
  const auto mu = tweedie_estimate(model, x_t, time);
  const auto amu = apply(op, mu);
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - amu[i];
  const auto filtered = apply_mask(mask, r);
  GuidanceGradient out;
  out.residual_norm = detail::l2_norm(filtered);
  const auto back = linear_adjoint(op, filtered);
  out.grad = model.tweedie_vjp(x_t, time, back).value_or(std::vector<double>{});
  if (out.grad.empty()) out.grad = numeric_tweedie_vjp(model, x_t, time, back);
  for (double& g : out.grad) g *= -2.0;
  return out;
}

// Algorithm: for t = T..1, mu from Tweedie, ancestral step to x', then
// x_{t-1} = x' - S_t grad_{x_t} ||phi_t(y) - phi_t(A(mu))||^2.
inline Trajectory guided_sample(const Measurement& measurement, const ForwardOperator& op, const ScoreModel& model,
                                const VarianceSchedule& schedule, const GuidanceConfig& guidance,
                                std::uint64_t seed) {
  const std::size_t n = model.size();
  const std::size_t T = schedule.T;
  validate(guidance.step_size);
  if (guidance.method != GuidanceMethod::none) {
    detail::require_size(measurement.y.size(), n, "measurement");
    detail::require_size(operator_size(op), n, "operator");
  }
  if (guidance.method == GuidanceMethod::fgps) validate(guidance.curriculum);
  if (guidance.use_theoretical_St) detail::require_sigma(measurement.sigma_y);

  Rng rng(derive_seed(seed, {stream::kSampler}));
  Rng measurement_rng(derive_seed(seed, {stream::kSampler, 1}));
  std::vector<double> x(n), z(n), fresh(n);
  fill_standard_normal(rng, x);
  const FrequencyMask all_pass = all_pass_mask(n);

  Trajectory trajectory;
  for (std::size_t t = T; t >= 1; --t) {
    const DiffusionTime time{t, schedule.alpha_bar_at(t)};
    const auto mu = tweedie_estimate(model, x, time);
    fill_standard_normal(rng, z);
    auto next = ddpm_step(x, mu, schedule, t, z);
    double residual_norm = 0.0;

    const bool guide = guidance.method != GuidanceMethod::none && (t > 1 || guidance.guide_last_step);
    if (guide) {
      const double u = progress(t, T);
      const double kappa = kappa_at(guidance.step_size, u);
      if (guidance.method == GuidanceMethod::ilvr) {
        // Loss ||y_t - A(x_t)||^2 with y_t ~ N(sqrt(ab) y, (1 - ab) I).
        fill_standard_normal(measurement_rng, fresh);
        const auto ax = apply(op, x);
        std::vector<double> r(n);
        const double a = std::sqrt(time.alpha_bar), b = std::sqrt(1.0 - time.alpha_bar);
        for (std::size_t i = 0; i < n; ++i) r[i] = a * measurement.y[i] + b * fresh[i] - ax[i];
        residual_norm = detail::l2_norm(r);
        if (residual_norm > 0.0) {
          const auto back = linear_adjoint(op, r);
          for (std::size_t i = 0; i < n; ++i) next[i] -= kappa / residual_norm * (-2.0 * back[i]);
        }
      } else {
        // DPS is FGPS with the all-pass mask, through the same code path.
        const FrequencyMask mask =
            guidance.method == GuidanceMethod::dps
                ? all_pass
                : low_pass_mask(n, cutoff_at(guidance.curriculum, u, time.alpha_bar));
        const auto [grad, norm] = guidance_gradient(op, model, x, time, measurement.y, mask);
        residual_norm = norm;
        if (guidance.use_theoretical_St) {
          const auto projected = apply_mask(mask, grad);
          const double scale = kappa / (measurement.sigma_y * measurement.sigma_y);
          for (std::size_t i = 0; i < n; ++i) next[i] -= scale * projected[i];
        } else if (residual_norm > 0.0) {
          for (std::size_t i = 0; i < n; ++i) next[i] -= kappa / residual_norm * grad[i];
        }
      }
    }
    detail::require_finite(next, t, "iterate");
    if (guidance.record) trajectory.steps.push_back({t, x, mu, residual_norm});
    x = std::move(next);
  }
  trajectory.x0 = std::move(x);
  return trajectory;
}

// ===== benchmark against the exact posterior =====

enum class RestorationMethod { none, dps, fgps, ilvr, posterior_mean };

inline const char* method_name(RestorationMethod m) {
  switch (m) {
    case RestorationMethod::none: return "none";
    case RestorationMethod::dps: return "dps";
    case RestorationMethod::fgps: return "fgps";
    case RestorationMethod::ilvr: return "ilvr";
    case RestorationMethod::posterior_mean: return "posterior-mean";
  }
  return "unknown";
}

inline RestorationMethod parse_restoration_method(const std::string& s) {
  if (s == "posterior-mean" || s == "posterior_mean") return RestorationMethod::posterior_mean;
  switch (parse_guidance_method(s)) {
    case GuidanceMethod::none: return RestorationMethod::none;
    case GuidanceMethod::dps: return RestorationMethod::dps;
    case GuidanceMethod::fgps: return RestorationMethod::fgps;
    case GuidanceMethod::ilvr: return RestorationMethod::ilvr;
  }
  throw InvalidParameter("unknown method '" + s + "'");
}

struct RestorationRow {
  std::size_t trial = 0;
  std::string method;
  std::string op;
  double mse_truth = 0.0;
  double mse_posterior_mean = 0.0;
  double residual_norm = 0.0;
  std::optional<double> wall_time_s;

  bool operator==(const RestorationRow&) const = default;
};

struct RestorationReport {
  std::vector<RestorationRow> rows;
};

struct BenchmarkSettings {
  VarianceSchedule schedule;
  FrequencyCurriculum curriculum;  // fgps
  StepSizeSchedule step_size;      // shared by all guided methods
  bool use_theoretical_St = false;
  bool guide_last_step = true;
  bool timing = false;
  std::size_t threads = 0;
};

struct TrialData {
  std::vector<double> x0;
  Measurement measurement;
  std::uint64_t sampler_seed = 0;
};

// Trial i draws x0, the measurement and the sampler stream from
// derive_seed(seed, {kTrial, i}); every method sees the same three.
inline TrialData make_trial(const StationaryGaussianPrior& prior, const ForwardOperator& op, double sigma_y,
                            std::uint64_t seed, std::size_t trial) {
  const std::uint64_t trial_seed = derive_seed(seed, {stream::kTrial, trial});
  const auto ensemble = sample_prior(prior, 1, trial_seed, 1);
  TrialData d;
  d.x0.assign(ensemble.row(0).begin(), ensemble.row(0).end());
  d.measurement = measure(op, d.x0, sigma_y, trial_seed);
  d.sampler_seed = derive_seed(trial_seed, {stream::kSampler});
  return d;
}

inline std::vector<double> restore(RestorationMethod method, const StationaryGaussianPrior& prior,
                                   const ForwardOperator& op, const TrialData& trial,
                                   const BenchmarkSettings& settings) {
  if (method == RestorationMethod::posterior_mean) {
    return exact_posterior(prior, op, trial.measurement.sigma_y, trial.measurement.y).mean;
  }
  GuidanceConfig guidance;
  guidance.step_size = settings.step_size;
  guidance.use_theoretical_St = settings.use_theoretical_St;
  guidance.guide_last_step = settings.guide_last_step;
  switch (method) {
    case RestorationMethod::none: guidance.method = GuidanceMethod::none; break;
    case RestorationMethod::dps: guidance.method = GuidanceMethod::dps; break;
    case RestorationMethod::fgps:
      guidance.method = GuidanceMethod::fgps;
      guidance.curriculum = settings.curriculum;
      break;
    case RestorationMethod::ilvr: guidance.method = GuidanceMethod::ilvr; break;
    case RestorationMethod::posterior_mean: break;
  }
  const AnalyticGaussianScore model(prior);
  return guided_sample(trial.measurement, op, model, settings.schedule, guidance, trial.sampler_seed).x0;
}

inline double mean_squared_error(std::span<const double> a, std::span<const double> b) {
  detail::require_size(a.size(), b.size(), "mse");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

inline RestorationReport posterior_benchmark(const StationaryGaussianPrior& prior, const ForwardOperator& op,
                                             double sigma_y, const std::vector<RestorationMethod>& methods,
                                             std::size_t trials, std::uint64_t seed,
                                             const BenchmarkSettings& settings) {
  detail::require(trials >= 1, "posterior_benchmark: trials must be positive");
  detail::require(!methods.empty(), "posterior_benchmark: no methods");
  detail::require_size(operator_size(op), prior.size(), "operator");
  std::vector<std::vector<RestorationRow>> per_trial(trials);
  const std::string tag = operator_id(op);

  parallel_for(
      trials,
      [&](std::size_t trial) {
        const auto data = make_trial(prior, op, sigma_y, seed, trial);
        const auto reference = exact_posterior(prior, op, sigma_y, data.measurement.y).mean;
        for (const auto method : methods) {
          const auto start = std::chrono::steady_clock::now();
          const auto estimate = restore(method, prior, op, data, settings);
          const auto stop = std::chrono::steady_clock::now();
          const auto ax = apply(op, estimate);
          std::vector<double> r(ax.size());
          for (std::size_t i = 0; i < r.size(); ++i) r[i] = data.measurement.y[i] - ax[i];
          RestorationRow row{trial,
                             method_name(method),
                             tag,
                             mean_squared_error(estimate, data.x0),
                             mean_squared_error(estimate, reference),
                             detail::l2_norm(r),
                             std::nullopt};
          if (settings.timing) row.wall_time_s = std::chrono::duration<double>(stop - start).count();
          per_trial[trial].push_back(std::move(row));
        }
      },
      settings.threads);

  RestorationReport report;
  for (auto& rows : per_trial) {
    for (auto& row : rows) report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace fgps
