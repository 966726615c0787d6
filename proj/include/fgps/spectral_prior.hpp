#pragma once

// Stationary Gaussian priors with power-law spectra.
//
// A stationary (circulant) covariance is stored by its DFT eigenvalues, the
// power spectral density bins s_k. The dense matrix is Sigma = F* diag(s) F
// with F the unitary DFT; its first row is the autocovariance R = IDFT(s).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fgps/error.hpp"
#include "fgps/fft.hpp"
#include "fgps/parallel.hpp"
#include "fgps/random.hpp"

namespace fgps {

inline constexpr std::size_t kDenseCap = 4096;

// |f_k| with the aliased convention min(k, n-k)/n, so bins k and n-k share a
// frequency and any function of |f_k| is Hermitian-symmetric.
inline double frequency_magnitude(std::size_t k, std::size_t n) {
  return static_cast<double>(std::min(k, n - k)) / static_cast<double>(n);
}

struct PowerLawSpectrum {
  double c = 1.0;
  double beta = 0.0;
  std::size_t n = 0;
  double dc_power = 0.0;

  // S(f_k) = c |f_k|^-beta for k != 0; bin 0 holds dc_power.
  double at(std::size_t k) const {
    if (k % n == 0) return dc_power;
    return c * std::pow(frequency_magnitude(k % n, n), -beta);
  }

  std::vector<double> bins() const {
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = at(k);
    return out;
  }
};

// dc_power defaults to S(f_1), keeping the zero-frequency bin finite.
inline PowerLawSpectrum make_power_law_spectrum(double c, double beta, std::size_t n,
                                                std::optional<double> dc_power = std::nullopt) {
  detail::require(std::isfinite(c) && c > 0.0, "power law: c must be positive");
  detail::require(std::isfinite(beta) && beta >= 0.0, "power law: beta must be nonnegative");
  detail::require(n >= 2, "power law: n must be at least 2");
  PowerLawSpectrum spectrum{c, beta, n, 0.0};
  const double dc = dc_power.value_or(spectrum.at(1));
  detail::require(std::isfinite(dc) && dc >= 0.0, "power law: dc_power must be nonnegative");
  spectrum.dc_power = dc;
  for (std::size_t k = 1; k < n; ++k) {
    if (!std::isfinite(spectrum.at(k))) throw InvalidParameter("power law: non-finite bin");
  }
  return spectrum;
}

class StationaryGaussianPrior {
 public:
  explicit StationaryGaussianPrior(std::vector<double> eigenvalues) : eigenvalues_(std::move(eigenvalues)) {
    const std::size_t n = eigenvalues_.size();
    detail::require(n >= 1, "prior: empty spectrum");
    for (std::size_t k = 0; k < n; ++k) {
      const double s = eigenvalues_[k];
      detail::require(std::isfinite(s) && s >= 0.0, "prior: eigenvalues must be finite and nonnegative");
      const double mirror = eigenvalues_[(n - k) % n];
      if (std::abs(s - mirror) > 1e-12 * std::max(1.0, std::abs(s))) {
        throw InvalidParameter("prior: spectrum is not symmetric (s_k != s_{n-k}) at k=" + std::to_string(k));
      }
    }
  }

  static StationaryGaussianPrior flat(std::size_t n, double power = 1.0) {
    return StationaryGaussianPrior(std::vector<double>(n, power));
  }

  std::size_t size() const { return eigenvalues_.size(); }
  std::span<const double> eigenvalues() const { return eigenvalues_; }
  double eigenvalue(std::size_t k) const { return eigenvalues_[k]; }

 private:
  std::vector<double> eigenvalues_;
};

inline StationaryGaussianPrior build_prior(const PowerLawSpectrum& spectrum) {
  return StationaryGaussianPrior(spectrum.bins());
}

// First row (and column) of the covariance: R = IDFT(s).
inline std::vector<double> autocovariance(const StationaryGaussianPrior& prior) {
  ComplexVector spectrum(prior.eigenvalues().begin(), prior.eigenvalues().end());
  return fft::inverse_real(spectrum, 1e-12);
}

// Sigma x via the spectral path.
inline std::vector<double> apply_covariance(const StationaryGaussianPrior& prior, std::span<const double> x) {
  detail::require_size(x.size(), prior.size(), "apply_covariance");
  ComplexVector spectrum = fft::forward(x);
  for (std::size_t k = 0; k < spectrum.size(); ++k) spectrum[k] *= prior.eigenvalue(k);
  return fft::inverse_real(spectrum);
}

// Row-major block of equal-length real signals.
struct SignalEnsemble {
  std::size_t count = 0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::vector<double> values;

  SignalEnsemble() = default;
  SignalEnsemble(std::size_t rows, std::size_t length, std::uint64_t seed_used = 0)
      : count(rows), n(length), seed(seed_used), values(rows * length, 0.0) {}

  std::span<double> row(std::size_t i) { return {values.data() + i * n, n}; }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * n, n}; }
};

// Draws one signal x = IDFT(sqrt(s) . DFT(eps)) using the given white noise.
inline std::vector<double> color_noise(const StationaryGaussianPrior& prior, std::span<const double> white) {
  detail::require_size(white.size(), prior.size(), "color_noise");
  ComplexVector spectrum = fft::forward(white);
  for (std::size_t k = 0; k < spectrum.size(); ++k) spectrum[k] *= std::sqrt(prior.eigenvalue(k));
  return fft::inverse_real(spectrum);
}

// Row i uses the sub-stream derive_seed(seed, {kPriorRow, i}).
inline SignalEnsemble sample_prior(const StationaryGaussianPrior& prior, std::size_t count, std::uint64_t seed,
                                   std::size_t threads = 0) {
  detail::require(count >= 1, "sample_prior: count must be positive");
  SignalEnsemble ensemble(count, prior.size(), seed);
  parallel_for(
      count,
      [&](std::size_t i) {
        Rng rng(derive_seed(seed, {stream::kPriorRow, i}));
        std::vector<double> white(prior.size());
        fill_standard_normal(rng, white);
        const auto x = color_noise(prior, white);
        std::copy(x.begin(), x.end(), ensemble.row(i).begin());
      },
      threads);
  return ensemble;
}

// Mean over rows of |DFT(x)_k|^2 / n.
inline std::vector<double> empirical_psd(const SignalEnsemble& ensemble) {
  detail::require(ensemble.count >= 1, "empirical_psd: empty ensemble");
  std::vector<double> psd(ensemble.n, 0.0);
  for (std::size_t i = 0; i < ensemble.count; ++i) {
    const auto spectrum = fft::forward(ensemble.row(i));
    for (std::size_t k = 0; k < ensemble.n; ++k) psd[k] += std::norm(spectrum[k]);
  }
  const double scale = 1.0 / (static_cast<double>(ensemble.count) * static_cast<double>(ensemble.n));
  for (double& p : psd) p *= scale;
  return psd;
}

// Explicit circulant covariance. Oracle path only; O(n^2) memory.
inline Eigen::MatrixXd dense_covariance(const StationaryGaussianPrior& prior, std::size_t cap = kDenseCap) {
  const std::size_t n = prior.size();
  if (n > cap) {
    throw ResourceError("dense_covariance: n=" + std::to_string(n) + " exceeds cap " + std::to_string(cap));
  }
  const auto row = autocovariance(prior);
  Eigen::MatrixXd sigma(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) sigma(i, j) = row[(j + n - i) % n];
  }
  // R is symmetric up to rounding; average so the matrix is exactly symmetric.
  return 0.5 * (sigma + sigma.transpose());
}

}  // namespace fgps
