#pragma once

// Self-check suite run by `fgps check`: every fast path against an
// independent route (dense algebra, finite differences, Monte-Carlo, direct
// DFT sums) plus the structural invariants of each module.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "fgps/analytic_scores.hpp"
#include "fgps/config.hpp"
#include "fgps/dense_oracle.hpp"
#include "fgps/harness.hpp"
#include "fgps/operators.hpp"
#include "fgps/reports.hpp"
#include "fgps/samplers.hpp"
#include "fgps/schedules.hpp"
#include "fgps/signal_io.hpp"
#include "fgps/spectral_prior.hpp"

namespace fgps::oracle {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline std::vector<double> randn(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> v(n);
  fill_standard_normal(rng, v);
  for (double& x : v) x *= scale;
  return v;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

inline double rel_diff(std::span<const double> a, std::span<const double> b) {
  return max_abs_diff(a, b) / std::max(1e-300, std::max(max_abs(a), max_abs(b)));
}

inline std::string sci(double v) {
  std::ostringstream o;
  o.precision(3);
  o << std::scientific << v;
  return o.str();
}

// Direct O(n^2) DFT, independent of FFTW.
inline std::vector<std::complex<double>> naive_dft(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      acc += x[j] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>((j * k) % n) / static_cast<double>(n));
    }
    out[k] = acc;
  }
  return out;
}

// log N(y; A Gamma x + b, A Sigma0t A^T + sy^2 I) as a function of x.
inline double log_likelihood(const Eigen::MatrixXd& sigma, const dense::AffineOperator& op, double sigma_y,
                             double alpha_bar, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const auto d = dense::denoiser(sigma, alpha_bar);
  const Eigen::VectorXd r = y - op.a * (d.gamma * x) - op.b;
  const auto m = op.a.rows();
  const Eigen::MatrixXd cov = op.a * d.cov * op.a.transpose() + sigma_y * sigma_y * Eigen::MatrixXd::Identity(m, m);
  return -0.5 * r.dot(cov.ldlt().solve(r));
}

inline std::vector<double> fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                       const Eigen::VectorXd& x, double h) {
  std::vector<double> g(static_cast<std::size_t>(x.size()));
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double plus = f(probe);
    probe(i) = x(i) - h;
    const double minus = f(probe);
    probe(i) = x(i);
    g[static_cast<std::size_t>(i)] = (plus - minus) / (2.0 * h);
  }
  return g;
}

inline StationaryGaussianPrior test_prior(std::size_t n, double beta = 2.5) {
  return build_prior(make_power_law_spectrum(1.0, beta, n));
}

}  // namespace detail

inline std::vector<CheckResult> run_all(bool quick = false) {
  using namespace detail;
  std::vector<CheckResult> results;
  auto check = [&](const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
    try {
      auto [ok, info] = body();
      results.push_back({name, ok, info});
    } catch (const std::exception& e) {
      results.push_back({name, false, std::string("exception: ") + e.what()});
    }
  };

  // ----- spectral prior -----
  check("prior/n4-example-bins-and-row", [] {
    const auto spec = make_power_law_spectrum(1.0, 2.0, 4, 16.0);
    const auto row = autocovariance(build_prior(spec));
    const std::vector<double> bins_want{16, 16, 4, 16}, row_want{13, 3, -3, 3};
    const double err = std::max(max_abs_diff(spec.bins(), bins_want), max_abs_diff(row, row_want));
    return std::pair{err < 1e-12, "max err " + sci(err)};
  });
  check("prior/eigenvalue-fidelity", [] {
    double worst = 0.0;
    for (std::size_t n : {4u, 64u, 128u}) {
      const auto prior = test_prior(n);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense_covariance(prior));
      std::vector<double> bins(prior.eigenvalues().begin(), prior.eigenvalues().end());
      std::sort(bins.begin(), bins.end());
      for (std::size_t k = 0; k < n; ++k) {
        worst = std::max(worst, std::abs(es.eigenvalues()(static_cast<Eigen::Index>(k)) - bins[k]) /
                                    std::max(1.0, bins.back()));
      }
    }
    return std::pair{worst < 1e-12, "max err relative to largest eigenvalue " + sci(worst)};
  });
  check("prior/psd-convergence", [quick] {
    const auto prior = test_prior(64, 2.0);
    const auto psd = empirical_psd(sample_prior(prior, quick ? 20000 : 100000, 7));
    double worst = 0.0;
    for (std::size_t k = 1; k < 64; ++k) worst = std::max(worst, std::abs(psd[k] / prior.eigenvalue(k) - 1.0));
    return std::pair{worst < (quick ? 0.1 : 0.05), "max relative deviation " + sci(worst)};
  });
  check("prior/determinism-and-io", [] {
    const auto prior = test_prior(32);
    const auto a = sample_prior(prior, 50, 3, 1), b = sample_prior(prior, 50, 3, 4);
    const auto back = decode_signals(encode_signals(a));
    return std::pair{a.values == b.values && back.values == a.values, ""};
  });

  // ----- operators -----
  check("operators/fft-vs-dense-vs-dft", [] {
    double worst = 0.0;
    const std::size_t n = 96;
    const auto x = randn(n, 11);
    for (const auto& op : {gaussian_blur_kernel(n, 3), high_pass_kernel(n, 5), directional_box_kernel(n, 8)}) {
      const Eigen::VectorXd dense_y = dense_matrix(op) * dense::vec(x);
      worst = std::max(worst, rel_diff(apply(op, x), fgps::detail::from_eigen(dense_y)));
      const auto dft = naive_dft(op.kernel());
      for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(dft[k] - op.response(k)));
    }
    return std::pair{worst < 1e-10, "max err " + sci(worst)};
  });
  check("operators/adjoint-identity", [] {
    const std::size_t n = 64;
    const auto op = directional_box_kernel(n, 5);
    const auto x = randn(n, 1), r = randn(n, 2);
    const auto ax = apply(op, x), atr = adjoint_apply(op, r);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < n; ++i) {
      lhs += ax[i] * r[i];
      rhs += x[i] * atr[i];
    }
    return std::pair{std::abs(lhs - rhs) < 1e-10 * std::max(1.0, std::abs(lhs)), "diff " + sci(std::abs(lhs - rhs))};
  });
  check("operators/kernel-sums-and-mask-semantics", [] {
    const std::size_t n = 128;
    double gs = 0, hs = 0;
    const auto gauss = gaussian_blur_kernel(n, 3), high = high_pass_kernel(n, 3);
    for (double v : gauss.kernel()) gs += v;
    for (double v : high.kernel()) hs += v;
    const auto mask = low_pass_mask(n, 0.25);
    SignalEnsemble e(1, n);
    const auto filtered = apply_mask(mask, randn(n, 5));
    std::copy(filtered.begin(), filtered.end(), e.row(0).begin());
    const auto psd = empirical_psd(e);
    double stopped = 0.0, passed = 0.0;
    for (std::size_t k = 0; k < n; ++k) (mask.passes(k) ? passed : stopped) = std::max(mask.passes(k) ? passed : stopped, psd[k]);
    // Zero up to the round-off of one FFT round trip.
    const bool ok = std::abs(gs - 1) < 1e-12 && std::abs(hs) < 1e-12 && stopped <= 1e-24 * passed && mask.passes(0);
    return std::pair{ok, "stopped/passed power " + sci(stopped / passed)};
  });
  check("operators/haze-affine", [] {
    const auto op = make_haze_operator(64, 1.0, 1.0);
    const auto x1 = randn(64, 8), x2 = randn(64, 9);
    std::vector<double> sum(64);
    for (std::size_t i = 0; i < 64; ++i) sum[i] = x1[i] + x2[i];
    const auto a = haze_apply(op, sum), b = haze_apply(op, x2);
    double err = 0;
    for (std::size_t i = 0; i < 64; ++i) err = std::max(err, std::abs(a[i] - b[i] - op.transmission()[i] * x1[i]));
    return std::pair{err < 1e-14, "max deviation " + sci(err)};
  });

  // ----- analytic scores -----
  const std::size_t n = 32;
  const auto prior = test_prior(n);
  const Eigen::MatrixXd sigma = dense_covariance(prior);
  const ForwardOperator hp = high_pass_kernel(n, 3);
  const ForwardOperator haze = make_haze_operator(n, 1.0, 1.0);
  const auto x0 = sample_prior(prior, 1, 21).values;
  const double ab = 0.3, sy = 1.0;
  std::vector<double> x_t(n);
  {
    const auto eps = randn(n, 22);
    for (std::size_t i = 0; i < n; ++i) x_t[i] = std::sqrt(ab) * x0[i] + std::sqrt(1 - ab) * eps[i];
  }

  check("scores/tweedie-consistency", [&] {
    const auto score = unconditional_score(prior, ab, x_t);
    const auto mu = tweedie_from_score(x_t, score, ab);
    const double err = rel_diff(mu, denoise_posterior(prior, ab, x_t).mu);
    return std::pair{err < 1e-10, "rel err " + sci(err)};
  });
  check("scores/unconditional-finite-difference", [&] {
    const Eigen::MatrixXd marginal = ab * sigma + (1 - ab) * Eigen::MatrixXd::Identity(n, n);
    const auto ldlt = marginal.ldlt();
    const auto fd = fd_gradient([&](const Eigen::VectorXd& v) { return -0.5 * v.dot(ldlt.solve(v)); }, dense::vec(x_t), 1e-5);
    const double err = rel_diff(unconditional_score(prior, ab, x_t), fd);
    return std::pair{err < 1e-5, "rel err " + sci(err)};
  });
  for (const auto* op : {&hp, &haze}) {
    const std::string tag = operator_id(*op);
    const auto y = measure(*op, x0, sy, 23).y;
    const auto aff = dense::affine(*op);
    check("scores/true-score-finite-difference/" + tag, [&] {
      const auto fd = fd_gradient(
          [&](const Eigen::VectorXd& v) { return log_likelihood(sigma, aff, sy, ab, v, dense::vec(y)); },
          dense::vec(x_t), 1e-5);
      const double err = rel_diff(true_likelihood_score(prior, *op, sy, ab, x_t, y), fd);
      return std::pair{err < 1e-4, "rel err " + sci(err)};
    });
    check("scores/dual-path/" + tag, [&] {
      const auto mask = low_pass_mask(n, 0.3);
      const auto xv = dense::vec(x_t), yv = dense::vec(y);
      double worst = 0.0;
      worst = std::max(worst, rel_diff(true_likelihood_score(prior, *op, sy, ab, x_t, y),
                                       fgps::detail::from_eigen(dense::true_likelihood_score(sigma, aff, sy, ab, xv, yv))));
      worst = std::max(worst, rel_diff(dps_likelihood_score(prior, *op, sy, ab, x_t, y),
                                       fgps::detail::from_eigen(dense::dps_likelihood_score(sigma, aff, sy, ab, xv, yv))));
      worst = std::max(worst, rel_diff(fgps_likelihood_score(prior, *op, sy, ab, x_t, y, mask),
                                       fgps::detail::from_eigen(dense::fgps_likelihood_score(
                                           sigma, aff, sy, ab, xv, yv, dense::mask_matrix(mask)))));
      worst = std::max(worst, rel_diff(dps_gap(prior, *op, sy, ab, x_t, y),
                                       fgps::detail::from_eigen(dense::dps_gap(sigma, aff, sy, ab, xv, yv))));
      worst = std::max(worst, rel_diff(exact_posterior(prior, *op, sy, y).mean,
                                       fgps::detail::from_eigen(dense::exact_posterior(sigma, aff, sy, yv).mean)));
      return std::pair{worst < 1e-9, "max rel err " + sci(worst)};
    });
    check("scores/gap-identity/" + tag, [&] {
      const auto gap = dps_gap(prior, *op, sy, ab, x_t, y);
      auto diff = dps_likelihood_score(prior, *op, sy, ab, x_t, y);
      const auto truth = true_likelihood_score(prior, *op, sy, ab, x_t, y);
      for (std::size_t i = 0; i < n; ++i) diff[i] -= truth[i];
      const double err = max_abs_diff(gap, diff) / std::max(1.0, max_abs(gap));
      const double at_one = max_abs(dps_gap(prior, *op, sy, 1.0, x_t, y));
      return std::pair{err < 1e-10 && at_one == 0.0, "err " + sci(err) + ", gap at ab=1 " + sci(at_one)};
    });
    check("scores/all-pass-reduction/" + tag, [&] {
      const double err = max_abs_diff(fgps_likelihood_score(prior, *op, sy, ab, x_t, y, all_pass_mask(n)),
                                      dps_likelihood_score(prior, *op, sy, ab, x_t, y));
      return std::pair{err <= 1e-12, "max diff " + sci(err)};
    });
  }
  check("scores/monte-carlo-oracle", [quick] {
    const std::size_t m = 8;
    const auto p = test_prior(m, 1.0);
    const ForwardOperator op = gaussian_blur_kernel(m, 1.0);
    const auto x0s = sample_prior(p, 1, 5).values;
    const double a = 0.5;
    std::vector<double> xt(m);
    const auto eps = randn(m, 6);
    for (std::size_t i = 0; i < m; ++i) xt[i] = std::sqrt(a) * x0s[i] + std::sqrt(1 - a) * eps[i];
    const auto y = measure(op, x0s, 1.0, 7).y;
    const auto est = mc_likelihood_score_oracle(p, op, 1.0, a, xt, y, quick ? 100000 : 1000000, 8);
    const auto truth = true_likelihood_score(p, op, 1.0, a, xt, y);
    double worst = 0.0;
    for (std::size_t i = 0; i < m; ++i) worst = std::max(worst, std::abs(est.score[i] - truth[i]) / est.standard_error[i]);
    return std::pair{worst < 3.0, "max |z| " + sci(worst)};
  });

  // ----- schedules -----
  check("schedules/validity", [] {
    bool ok = true;
    for (const auto& s : {ddpm_variance_schedule(1000), desk_variance_schedule(200)}) {
      for (std::size_t t = 2; t <= s.T; ++t) ok = ok && s.alpha_bar_at(t) < s.alpha_bar_at(t - 1);
      for (double v : s.sigma_tilde) ok = ok && std::isfinite(v) && v >= 0.0;
      ok = ok && s.alpha_bar_at(s.T) < 0.01 && s.sigma_tilde_at(1) == 0.0;
    }
    return std::pair{ok, ""};
  });
  check("schedules/endpoints-and-monotone", [] {
    const auto prior = test_prior(64);
    const auto sched = desk_variance_schedule(200);
    FrequencyCurriculum lin, ex;
    lin.kind = FrequencyCurriculum::Kind::linear;
    ex.kind = FrequencyCurriculum::Kind::exponential;
    lin.tau_start = ex.tau_start = 0.1;
    lin.tau_end = ex.tau_end = 0.6;
    const auto data = data_dependent_curriculum({prior.eigenvalues().begin(), prior.eigenvalues().end()}, 1.0);
    const StepSizeSchedule k{StepSizeSchedule::Kind::cosine, 5.0, 1.0};
    bool ok = cutoff_at(lin, 0) == 0.1 && cutoff_at(lin, 1) == 0.6 &&
              cutoff_at(ex, 1) == 0.6 - 0.5 * std::exp(-5.0) && kappa_at(k, 0) == 5.0 && kappa_at(k, 1) == 1.0;
    double prev[3] = {-1, -1, -1};
    for (std::size_t t = 200; t >= 1; --t) {
      const double u = progress(t, 200);
      const double cur[3] = {cutoff_at(lin, u), cutoff_at(ex, u), cutoff_at(data, u, sched.alpha_bar_at(t))};
      for (int i = 0; i < 3; ++i) {
        ok = ok && cur[i] >= prev[i];
        prev[i] = cur[i];
      }
    }
    return std::pair{ok, ""};
  });

  // ----- samplers -----
  check("samplers/ddpm-step-identity", [] {
    const auto s = desk_variance_schedule(50);
    const auto v = randn(16, 3), z = randn(16, 4);
    const auto c = step_coefficients(s, 10);
    const auto out = ddpm_step(v, v, s, 10, z);
    double err = 0;
    for (std::size_t i = 0; i < 16; ++i) err = std::max(err, std::abs(out[i] - ((c.c_x + c.c_mu) * v[i] + c.sigma * z[i])));
    return std::pair{err < 1e-14, "err " + sci(err)};
  });
  check("samplers/fgps-all-pass-equals-dps", [] {
    const std::size_t m = 64;
    const auto p = test_prior(m);
    const ForwardOperator op = high_pass_kernel(m, 5);
    const auto trial = make_trial(p, op, 0.05, 1, 0);
    const AnalyticGaussianScore model(p);
    GuidanceConfig g;
    g.step_size = {StepSizeSchedule::Kind::cosine, 5.0, 1.0};
    g.method = GuidanceMethod::dps;
    const auto sched = desk_variance_schedule(100);
    const auto a = guided_sample(trial.measurement, op, model, sched, g, trial.sampler_seed).x0;
    g.method = GuidanceMethod::fgps;
    g.curriculum = fixed_curriculum(1.0);
    const auto b = guided_sample(trial.measurement, op, model, sched, g, trial.sampler_seed).x0;
    return std::pair{a == b, ""};
  });

  // ----- harness -----
  check("harness/csv-round-trip-and-determinism", [] {
    auto cfg = defaults_for(Subcommand::gap_sweep);
    cfg.n = 32;
    cfg.count = 20;
    cfg.T = 50;
    cfg.grid = 5;
    const auto a = run_gap_sweep(cfg), b = run_gap_sweep(cfg);
    const bool ok = emit_csv(a) == emit_csv(b) && parse_gap_csv(emit_csv(a)) == a &&
                    parse_config(to_text(cfg)) == cfg;
    return std::pair{ok, std::to_string(a.rows.size()) + " rows"};
  });
  return results;
}

}  // namespace fgps::oracle
