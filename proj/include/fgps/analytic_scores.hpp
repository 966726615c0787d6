#pragma once

// Closed-form scores under a stationary Gaussian prior.
//
// With x_t = sqrt(ab) x0 + sqrt(1-ab) eps and x0 ~ N(0, Sigma), everything is
// diagonal in the DFT basis for circulant A:
//   Gamma_k   = sqrt(ab) s_k / (ab s_k + 1 - ab)
//   Sigma0t_k = s_k (1 - ab) / (ab s_k + 1 - ab)
//   mu        = Gamma x_t
// The true noisy-likelihood score is (A Gamma)^T (A Sigma0t A^T + sy^2 I)^-1 D
// with D = y - A mu, while DPS replaces the inverse with sy^-2 I.
//
// The haze operator is affine, A(x) = J x + b with J diagonal, so it is not
// diagonalized by the DFT; its paths go through small dense solves.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <variant>
#include <vector>

#include "fgps/error.hpp"
#include "fgps/fft.hpp"
#include "fgps/operators.hpp"
#include "fgps/random.hpp"
#include "fgps/spectral_prior.hpp"

namespace fgps {

// Posterior of x0 given x_t (Gaussian, shares the prior's eigenbasis).
struct DenoisePosterior {
  std::vector<double> mu;
  std::vector<double> cov_eigenvalues;
  std::vector<double> gamma;
  double alpha_bar = 0.0;
};

namespace detail {

inline void require_alpha_bar(double alpha_bar) {
  require(std::isfinite(alpha_bar) && alpha_bar >= 0.0 && alpha_bar <= 1.0, "alpha_bar must lie in [0, 1]");
}

inline void require_sigma(double sigma_y) {
  require(std::isfinite(sigma_y) && sigma_y >= 0.0, "sigma_y must be nonnegative");
  if (sigma_y == 0.0) throw SingularityError("sigma_y = 0 makes the likelihood covariance singular");
}

// Gamma_k; bins with a zero denominator (ab = 1, s_k = 0) take the limit 0.
inline double gamma_bin(double s, double alpha_bar) {
  const double denom = alpha_bar * s + (1.0 - alpha_bar);
  if (denom == 0.0) return 0.0;
  return std::sqrt(alpha_bar) * s / denom;
}

inline double posterior_cov_bin(double s, double alpha_bar) {
  const double denom = alpha_bar * s + (1.0 - alpha_bar);
  if (denom == 0.0) return 0.0;
  return s * (1.0 - alpha_bar) / denom;
}

inline Eigen::VectorXd to_eigen(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> from_eigen(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline std::vector<double> multiply_spectrum(std::span<const double> eigenvalues, std::span<const double> x) {
  ComplexVector spectrum = fft::forward(x);
  for (std::size_t k = 0; k < spectrum.size(); ++k) spectrum[k] *= eigenvalues[k];
  return fft::inverse_real(spectrum);
}

}  // namespace detail

inline std::vector<double> tweedie_gamma(const StationaryGaussianPrior& prior, double alpha_bar) {
  detail::require_alpha_bar(alpha_bar);
  std::vector<double> gamma(prior.size());
  for (std::size_t k = 0; k < gamma.size(); ++k) gamma[k] = detail::gamma_bin(prior.eigenvalue(k), alpha_bar);
  return gamma;
}

inline std::vector<double> posterior_cov_eigenvalues(const StationaryGaussianPrior& prior, double alpha_bar) {
  detail::require_alpha_bar(alpha_bar);
  std::vector<double> cov(prior.size());
  for (std::size_t k = 0; k < cov.size(); ++k) cov[k] = detail::posterior_cov_bin(prior.eigenvalue(k), alpha_bar);
  return cov;
}

inline DenoisePosterior denoise_posterior(const StationaryGaussianPrior& prior, double alpha_bar,
                                          std::span<const double> x_t) {
  detail::require_size(x_t.size(), prior.size(), "denoise_posterior");
  DenoisePosterior post;
  post.alpha_bar = alpha_bar;
  post.gamma = tweedie_gamma(prior, alpha_bar);
  post.cov_eigenvalues = posterior_cov_eigenvalues(prior, alpha_bar);
  post.mu = detail::multiply_spectrum(post.gamma, x_t);
  return post;
}

// Score of the marginal N(0, ab Sigma + (1 - ab) I).
inline std::vector<double> unconditional_score(const StationaryGaussianPrior& prior, double alpha_bar,
                                               std::span<const double> x_t) {
  detail::require_alpha_bar(alpha_bar);
  detail::require_size(x_t.size(), prior.size(), "unconditional_score");
  ComplexVector spectrum = fft::forward(x_t);
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    const double var = alpha_bar * prior.eigenvalue(k) + (1.0 - alpha_bar);
    if (var == 0.0) throw SingularityError("unconditional_score: marginal covariance is singular at bin " + std::to_string(k));
    spectrum[k] /= -var;
  }
  return fft::inverse_real(spectrum);
}

// ===== circulant operators: per-frequency closed forms =====

namespace detail {

struct ScoreSpectra {
  ComplexVector delta;        // D_hat = y_hat - a_hat mu_hat
  std::vector<double> gamma;
  std::vector<double> cov;
};

inline ScoreSpectra score_spectra(const StationaryGaussianPrior& prior, const CirculantOperator& op, double alpha_bar,
                                  std::span<const double> x_t, std::span<const double> y) {
  require_alpha_bar(alpha_bar);
  require_size(op.size(), prior.size(), "operator");
  require_size(x_t.size(), prior.size(), "x_t");
  require_size(y.size(), prior.size(), "y");
  ScoreSpectra out;
  out.gamma = tweedie_gamma(prior, alpha_bar);
  out.cov = posterior_cov_eigenvalues(prior, alpha_bar);
  const ComplexVector xt_hat = fft::forward(x_t);
  out.delta = fft::forward(y);
  for (std::size_t k = 0; k < out.delta.size(); ++k) out.delta[k] -= op.response(k) * (out.gamma[k] * xt_hat[k]);
  return out;
}

// Per-bin weight w_k applied as IDFT(conj(a_hat) Gamma w D_hat).
template <class Weight>
std::vector<double> weighted_back_projection(const CirculantOperator& op, const ScoreSpectra& sp, Weight weight) {
  ComplexVector out(sp.delta.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = std::conj(op.response(k)) * sp.gamma[k] * weight(k) * sp.delta[k];
  }
  return fft::inverse_real(out);
}

inline double likelihood_precision(const CirculantOperator& op, const ScoreSpectra& sp, std::size_t k, double sigma_y) {
  const double var = std::norm(op.response(k)) * sp.cov[k] + sigma_y * sigma_y;
  if (var == 0.0) throw SingularityError("likelihood covariance is singular at bin " + std::to_string(k));
  return 1.0 / var;
}

// sy^-2 - (|a|^2 c + sy^2)^-1 without the cancellation; exactly 0 when c = 0.
inline double gap_weight(const CirculantOperator& op, const ScoreSpectra& sp, std::size_t k, double sigma_y) {
  const double lifted = std::norm(op.response(k)) * sp.cov[k];
  return lifted * likelihood_precision(op, sp, k, sigma_y) / (sigma_y * sigma_y);
}

}  // namespace detail

inline std::vector<double> true_likelihood_score(const StationaryGaussianPrior& prior, const CirculantOperator& op,
                                                 double sigma_y, double alpha_bar, std::span<const double> x_t,
                                                 std::span<const double> y) {
  detail::require(std::isfinite(sigma_y) && sigma_y >= 0.0, "sigma_y must be nonnegative");
  const auto sp = detail::score_spectra(prior, op, alpha_bar, x_t, y);
  return detail::weighted_back_projection(
      op, sp, [&](std::size_t k) { return detail::likelihood_precision(op, sp, k, sigma_y); });
}

inline std::vector<double> dps_likelihood_score(const StationaryGaussianPrior& prior, const CirculantOperator& op,
                                                double sigma_y, double alpha_bar, std::span<const double> x_t,
                                                std::span<const double> y) {
  detail::require_sigma(sigma_y);
  const auto sp = detail::score_spectra(prior, op, alpha_bar, x_t, y);
  const double inv = 1.0 / (sigma_y * sigma_y);
  return detail::weighted_back_projection(op, sp, [&](std::size_t) { return inv; });
}

// Binary mask: (C C^T)^+ is the identity on the pass-band and zero elsewhere.
inline std::vector<double> fgps_likelihood_score(const StationaryGaussianPrior& prior, const CirculantOperator& op,
                                                 double sigma_y, double alpha_bar, std::span<const double> x_t,
                                                 std::span<const double> y, const FrequencyMask& mask) {
  detail::require_sigma(sigma_y);
  detail::require_size(mask.size(), prior.size(), "mask");
  detail::require(mask.passed_count() >= 1, "fgps: mask passes no frequency");
  const auto sp = detail::score_spectra(prior, op, alpha_bar, x_t, y);
  const double inv = 1.0 / (sigma_y * sigma_y);
  return detail::weighted_back_projection(op, sp, [&](std::size_t k) { return mask.passes(k) ? inv : 0.0; });
}

// (A Gamma)^T (sy^-2 I - (A Sigma0t A^T + sy^2 I)^-1) D, evaluated directly.
inline std::vector<double> dps_gap(const StationaryGaussianPrior& prior, const CirculantOperator& op, double sigma_y,
                                   double alpha_bar, std::span<const double> x_t, std::span<const double> y) {
  detail::require_sigma(sigma_y);
  const auto sp = detail::score_spectra(prior, op, alpha_bar, x_t, y);
  return detail::weighted_back_projection(op, sp,
                                          [&](std::size_t k) { return detail::gap_weight(op, sp, k, sigma_y); });
}

// Stopped bins contribute -(true weight), passed bins the DPS gap weight.
inline std::vector<double> fgps_gap(const StationaryGaussianPrior& prior, const CirculantOperator& op, double sigma_y,
                                    double alpha_bar, std::span<const double> x_t, std::span<const double> y,
                                    const FrequencyMask& mask) {
  detail::require_sigma(sigma_y);
  detail::require_size(mask.size(), prior.size(), "mask");
  detail::require(mask.passed_count() >= 1, "fgps: mask passes no frequency");
  const auto sp = detail::score_spectra(prior, op, alpha_bar, x_t, y);
  return detail::weighted_back_projection(op, sp, [&](std::size_t k) {
    return mask.passes(k) ? detail::gap_weight(op, sp, k, sigma_y) : -detail::likelihood_precision(op, sp, k, sigma_y);
  });
}

// ===== haze (affine) operator: dense route =====

namespace detail {

inline Eigen::MatrixXd circulant_from_eigenvalues(std::span<const double> eigenvalues) {
  return dense_covariance(StationaryGaussianPrior(std::vector<double>(eigenvalues.begin(), eigenvalues.end())));
}

struct AffineSystem {
  Eigen::VectorXd delta;           // y - b - J mu
  Eigen::MatrixXd gamma;           // dense Gamma
  Eigen::VectorXd transmission;    // diag of J
  Eigen::MatrixXd lifted;          // J Sigma0t J
  Eigen::LLT<Eigen::MatrixXd> llt;  // J Sigma0t J + sy^2 I
};

inline AffineSystem affine_system(const StationaryGaussianPrior& prior, const HazeOperator& op, double sigma_y,
                                  double alpha_bar, std::span<const double> x_t, std::span<const double> y) {
  require_alpha_bar(alpha_bar);
  require_size(op.size(), prior.size(), "operator");
  require_size(x_t.size(), prior.size(), "x_t");
  require_size(y.size(), prior.size(), "y");
  AffineSystem sys;
  sys.transmission = to_eigen(op.transmission());
  sys.gamma = circulant_from_eigenvalues(tweedie_gamma(prior, alpha_bar));
  const Eigen::MatrixXd cov = circulant_from_eigenvalues(posterior_cov_eigenvalues(prior, alpha_bar));
  const Eigen::VectorXd mu = sys.gamma * to_eigen(x_t);
  sys.delta = to_eigen(y) - to_eigen(haze_apply(op, from_eigen(mu)));
  const auto n = static_cast<Eigen::Index>(prior.size());
  sys.lifted = sys.transmission.asDiagonal() * cov * sys.transmission.asDiagonal();
  sys.llt.compute(sys.lifted + sigma_y * sigma_y * Eigen::MatrixXd::Identity(n, n));
  if (sys.llt.info() != Eigen::Success) throw SingularityError("haze likelihood covariance is not positive definite");
  return sys;
}

}  // namespace detail

inline std::vector<double> true_likelihood_score(const StationaryGaussianPrior& prior, const HazeOperator& op,
                                                 double sigma_y, double alpha_bar, std::span<const double> x_t,
                                                 std::span<const double> y) {
  detail::require_sigma(sigma_y);
  const auto sys = detail::affine_system(prior, op, sigma_y, alpha_bar, x_t, y);
  const Eigen::VectorXd w = sys.llt.solve(sys.delta);
  return detail::from_eigen(sys.gamma * (sys.transmission.cwiseProduct(w)));
}

inline std::vector<double> dps_likelihood_score(const StationaryGaussianPrior& prior, const HazeOperator& op,
                                                double sigma_y, double alpha_bar, std::span<const double> x_t,
                                                std::span<const double> y) {
  detail::require_sigma(sigma_y);
  const auto mu = denoise_posterior(prior, alpha_bar, x_t).mu;
  const auto ax = haze_apply(op, mu);
  std::vector<double> back(ax.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    back[i] = op.transmission()[i] * (y[i] - ax[i]) / (sigma_y * sigma_y);
  }
  return detail::multiply_spectrum(tweedie_gamma(prior, alpha_bar), back);
}

inline std::vector<double> fgps_likelihood_score(const StationaryGaussianPrior& prior, const HazeOperator& op,
                                                 double sigma_y, double alpha_bar, std::span<const double> x_t,
                                                 std::span<const double> y, const FrequencyMask& mask) {
  detail::require_sigma(sigma_y);
  detail::require_size(mask.size(), prior.size(), "mask");
  detail::require(mask.passed_count() >= 1, "fgps: mask passes no frequency");
  detail::require_size(y.size(), prior.size(), "y");
  const auto mu = denoise_posterior(prior, alpha_bar, x_t).mu;
  const auto ax = haze_apply(op, mu);
  std::vector<double> residual(ax.size());
  for (std::size_t i = 0; i < residual.size(); ++i) residual[i] = y[i] - ax[i];
  auto filtered = apply_mask(mask, residual);
  for (std::size_t i = 0; i < filtered.size(); ++i) {
    filtered[i] *= op.transmission()[i] / (sigma_y * sigma_y);
  }
  return detail::multiply_spectrum(tweedie_gamma(prior, alpha_bar), filtered);
}

inline std::vector<double> dps_gap(const StationaryGaussianPrior& prior, const HazeOperator& op, double sigma_y,
                                   double alpha_bar, std::span<const double> x_t, std::span<const double> y) {
  detail::require_sigma(sigma_y);
  const auto sys = detail::affine_system(prior, op, sigma_y, alpha_bar, x_t, y);
  // sy^-2 I - M^-1 = M^-1 (J Sigma0t J) / sy^2
  const Eigen::VectorXd w = sys.llt.solve(sys.lifted * sys.delta) / (sigma_y * sigma_y);
  return detail::from_eigen(sys.gamma * (sys.transmission.cwiseProduct(w)));
}

// DPS gap minus the stop-band part of the residual.
inline std::vector<double> fgps_gap(const StationaryGaussianPrior& prior, const HazeOperator& op, double sigma_y,
                                    double alpha_bar, std::span<const double> x_t, std::span<const double> y,
                                    const FrequencyMask& mask) {
  detail::require_sigma(sigma_y);
  detail::require_size(mask.size(), prior.size(), "mask");
  detail::require(mask.passed_count() >= 1, "fgps: mask passes no frequency");
  const auto sys = detail::affine_system(prior, op, sigma_y, alpha_bar, x_t, y);
  Eigen::VectorXd w = sys.llt.solve(sys.lifted * sys.delta);
  if (!mask.all_pass()) {
    FrequencyMask stop = mask;
    for (auto& p : stop.pass) p = p ? 0 : 1;
    w -= detail::to_eigen(apply_mask(stop, detail::from_eigen(sys.delta)));
  }
  w /= sigma_y * sigma_y;
  return detail::from_eigen(sys.gamma * (sys.transmission.cwiseProduct(w)));
}

// ===== variant dispatch =====

inline std::vector<double> true_likelihood_score(const StationaryGaussianPrior& prior, const ForwardOperator& op,
                                                 double sigma_y, double alpha_bar, std::span<const double> x_t,
                                                 std::span<const double> y) {
  return std::visit([&](const auto& o) { return true_likelihood_score(prior, o, sigma_y, alpha_bar, x_t, y); }, op);
}

inline std::vector<double> dps_likelihood_score(const StationaryGaussianPrior& prior, const ForwardOperator& op,
                                                double sigma_y, double alpha_bar, std::span<const double> x_t,
                                                std::span<const double> y) {
  return std::visit([&](const auto& o) { return dps_likelihood_score(prior, o, sigma_y, alpha_bar, x_t, y); }, op);
}

inline std::vector<double> fgps_likelihood_score(const StationaryGaussianPrior& prior, const ForwardOperator& op,
                                                 double sigma_y, double alpha_bar, std::span<const double> x_t,
                                                 std::span<const double> y, const FrequencyMask& mask) {
  return std::visit(
      [&](const auto& o) { return fgps_likelihood_score(prior, o, sigma_y, alpha_bar, x_t, y, mask); }, op);
}

inline std::vector<double> dps_gap(const StationaryGaussianPrior& prior, const ForwardOperator& op, double sigma_y,
                                   double alpha_bar, std::span<const double> x_t, std::span<const double> y) {
  return std::visit([&](const auto& o) { return dps_gap(prior, o, sigma_y, alpha_bar, x_t, y); }, op);
}

inline std::vector<double> fgps_gap(const StationaryGaussianPrior& prior, const ForwardOperator& op, double sigma_y,
                                    double alpha_bar, std::span<const double> x_t, std::span<const double> y,
                                    const FrequencyMask& mask) {
  return std::visit([&](const auto& o) { return fgps_gap(prior, o, sigma_y, alpha_bar, x_t, y, mask); }, op);
}

// ===== exact posterior p(x0 | y) =====

struct SpectralCovariance {
  std::vector<double> eigenvalues;
};

struct GaussianBelief {
  std::vector<double> mean;
  std::variant<SpectralCovariance, Eigen::MatrixXd> cov;

  bool is_spectral() const { return std::holds_alternative<SpectralCovariance>(cov); }

  Eigen::MatrixXd dense_cov(std::size_t cap = kDenseCap) const {
    if (const auto* s = std::get_if<SpectralCovariance>(&cov)) {
      if (s->eigenvalues.size() > cap) throw ResourceError("GaussianBelief: n exceeds dense cap");
      return detail::circulant_from_eigenvalues(s->eigenvalues);
    }
    return std::get<Eigen::MatrixXd>(cov);
  }
};

inline GaussianBelief exact_posterior(const StationaryGaussianPrior& prior, const CirculantOperator& op, double sigma_y,
                                      std::span<const double> y) {
  detail::require(std::isfinite(sigma_y) && sigma_y >= 0.0, "sigma_y must be nonnegative");
  detail::require_size(op.size(), prior.size(), "operator");
  detail::require_size(y.size(), prior.size(), "y");
  ComplexVector mean = fft::forward(y);
  SpectralCovariance cov{std::vector<double>(prior.size())};
  for (std::size_t k = 0; k < mean.size(); ++k) {
    const double s = prior.eigenvalue(k);
    const double var = std::norm(op.response(k)) * s + sigma_y * sigma_y;
    if (var == 0.0) {
      // s_k = 0 or an unobserved noiseless bin; the prior alone decides it.
      if (s != 0.0) throw SingularityError("exact_posterior: singular measurement covariance at bin " + std::to_string(k));
      mean[k] = 0.0;
      cov.eigenvalues[k] = 0.0;
      continue;
    }
    mean[k] *= s * std::conj(op.response(k)) / var;
    cov.eigenvalues[k] = s * sigma_y * sigma_y / var;
  }
  return {fft::inverse_real(mean), std::move(cov)};
}

inline GaussianBelief exact_posterior(const StationaryGaussianPrior& prior, const HazeOperator& op, double sigma_y,
                                      std::span<const double> y) {
  detail::require_sigma(sigma_y);
  detail::require_size(op.size(), prior.size(), "operator");
  detail::require_size(y.size(), prior.size(), "y");
  const Eigen::MatrixXd sigma = dense_covariance(prior);
  const Eigen::VectorXd t = detail::to_eigen(op.transmission());
  const Eigen::VectorXd b = detail::to_eigen(affine_offset(ForwardOperator(op)));
  const auto n = static_cast<Eigen::Index>(prior.size());
  Eigen::MatrixXd m = t.asDiagonal() * sigma * t.asDiagonal();
  m += sigma_y * sigma_y * Eigen::MatrixXd::Identity(n, n);
  const Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw SingularityError("exact_posterior: measurement covariance not positive definite");
  const Eigen::MatrixXd gain_t = llt.solve(t.asDiagonal() * sigma);  // (J S J^T + s^2 I)^-1 J S
  const Eigen::VectorXd mean = gain_t.transpose() * (detail::to_eigen(y) - b);
  Eigen::MatrixXd cov = sigma - (sigma * t.asDiagonal()) * gain_t;
  cov = 0.5 * (cov + cov.transpose());
  return {detail::from_eigen(mean), std::move(cov)};
}

inline GaussianBelief exact_posterior(const StationaryGaussianPrior& prior, const ForwardOperator& op, double sigma_y,
                                      std::span<const double> y) {
  return std::visit([&](const auto& o) { return exact_posterior(prior, o, sigma_y, y); }, op);
}

// ===== Monte-Carlo oracle =====

struct McScoreEstimate {
  std::vector<double> score;
  std::vector<double> standard_error;
  double effective_sample_size = 0.0;
};

inline constexpr std::size_t kMcMaxDimension = 16;
inline constexpr std::size_t kMcMinSamples = 10000;
inline constexpr double kMcMinEffectiveSamples = 10.0;

// Estimates grad_{x_t} log p(y | x_t) = grad log integral p(y|x0) p(x0|x_t) dx0
// from x0 ~ p(x0 | x_t) drawn exactly. With self-normalized weights
// w ~ p(y | x0), the identity grad log p(y|x_t) = E_w[grad_{x_t} log p(x0|x_t)]
// gives Gamma Sigma0t^-1 (E_w[x0] - mu) on bins with Sigma0t > 0. Bins where
// the denoising posterior is a point mass (ab = 1) use the pathwise form
// Gamma A^T E_w[y - A x0] / sy^2 instead.
inline McScoreEstimate mc_likelihood_score_oracle(const StationaryGaussianPrior& prior, const ForwardOperator& op,
                                                  double sigma_y, double alpha_bar, std::span<const double> x_t,
                                                  std::span<const double> y, std::size_t sample_count,
                                                  std::uint64_t seed) {
  const std::size_t n = prior.size();
  detail::require(n <= kMcMaxDimension, "mc oracle: n must be at most 16");
  detail::require(sample_count >= kMcMinSamples, "mc oracle: sample_count must be at least 1e4");
  detail::require_sigma(sigma_y);
  detail::require_size(x_t.size(), n, "x_t");
  detail::require_size(y.size(), n, "y");
  detail::require_size(operator_size(op), n, "operator");

  const auto post = denoise_posterior(prior, alpha_bar, x_t);
  const StationaryGaussianPrior posterior_cov(post.cov_eigenvalues);
  Rng rng(derive_seed(seed, {stream::kMonteCarlo}));

  std::vector<double> samples(sample_count * n);
  std::vector<double> log_w(sample_count);
  std::vector<double> white(n);
  for (std::size_t i = 0; i < sample_count; ++i) {
    fill_standard_normal(rng, white);
    const auto dev = color_noise(posterior_cov, white);
    double* x0 = samples.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) x0[j] = post.mu[j] + dev[j];
    const auto ax = apply(op, std::span<const double>(x0, n));
    double sq = 0.0;
    for (std::size_t j = 0; j < n; ++j) sq += (y[j] - ax[j]) * (y[j] - ax[j]);
    log_w[i] = -sq / (2.0 * sigma_y * sigma_y);
  }

  const double max_log = *std::max_element(log_w.begin(), log_w.end());
  if (!std::isfinite(max_log)) throw NumericalDegeneracy("mc oracle: non-finite log weights");
  std::vector<double> w(sample_count);
  double total = 0.0;
  for (std::size_t i = 0; i < sample_count; ++i) total += (w[i] = std::exp(log_w[i] - max_log));
  double sum_sq = 0.0;
  for (double& wi : w) {
    wi /= total;
    sum_sq += wi * wi;
  }
  const double ess = 1.0 / sum_sq;
  if (!std::isfinite(ess) || ess < kMcMinEffectiveSamples) {
    throw NumericalDegeneracy("mc oracle: importance weights degenerate (ESS=" + std::to_string(ess) + ")");
  }

  std::vector<double> mean(n, 0.0);
  for (std::size_t i = 0; i < sample_count; ++i) {
    for (std::size_t j = 0; j < n; ++j) mean[j] += w[i] * samples[i * n + j];
  }

  // The estimator is an affine map L of the weighted mean. L acts per bin:
  //   score-identity bins: Gamma / Sigma0t
  //   point-mass bins:     -Gamma conj(a_hat) a_hat / sy^2 (plus a constant)
  std::vector<double> score_gain(n, 0.0);
  std::vector<double> path_gain(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    if (post.cov_eigenvalues[k] > 0.0) {
      score_gain[k] = post.gamma[k] / post.cov_eigenvalues[k];
    } else {
      path_gain[k] = post.gamma[k] / (sigma_y * sigma_y);
    }
  }
  const bool has_path_bins = std::any_of(path_gain.begin(), path_gain.end(), [](double g) { return g != 0.0; });

  auto linear_map = [&](std::span<const double> v, bool with_offset) {
    std::vector<double> centered(v.begin(), v.end());
    if (with_offset) {
      for (std::size_t j = 0; j < n; ++j) centered[j] -= post.mu[j];
    }
    auto out = detail::multiply_spectrum(score_gain, centered);
    if (has_path_bins) {
      // Pathwise part: Gamma J^T (y - A(v)) on the point-mass bins.
      std::vector<double> residual(n);
      if (with_offset) {
        const auto av = apply(op, v);
        for (std::size_t j = 0; j < n; ++j) residual[j] = y[j] - av[j];
      } else {
        const auto jv = linear_apply(op, v);
        for (std::size_t j = 0; j < n; ++j) residual[j] = -jv[j];
      }
      const auto back = detail::multiply_spectrum(path_gain, linear_adjoint(op, residual));
      for (std::size_t j = 0; j < n; ++j) out[j] += back[j];
    }
    return out;
  };

  McScoreEstimate est;
  est.score = linear_map(mean, true);
  est.effective_sample_size = ess;
  // Delta-method variance of a self-normalized ratio: sum_i w_i^2 (L(x0_i - mean))^2.
  std::vector<double> var(n, 0.0);
  std::vector<double> d(n);
  for (std::size_t i = 0; i < sample_count; ++i) {
    for (std::size_t j = 0; j < n; ++j) d[j] = samples[i * n + j] - mean[j];
    const auto ld = linear_map(d, false);
    for (std::size_t j = 0; j < n; ++j) var[j] += w[i] * w[i] * ld[j] * ld[j];
  }
  est.standard_error.resize(n);
  for (std::size_t j = 0; j < n; ++j) est.standard_error[j] = std::sqrt(var[j]);
  for (double v : est.score) {
    if (!std::isfinite(v)) throw NumericalDegeneracy("mc oracle: non-finite score estimate");
  }
  return est;
}

}  // namespace fgps
