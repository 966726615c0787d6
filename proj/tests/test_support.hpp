#pragma once

// Independent reference routines for the tests. Nothing here calls the
// library's FFT or spectral fast paths.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace fgps::testing {

using cplx = std::complex<double>;

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed ^ 0xa5a5a5a5ULL);
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

inline cplx twiddle(std::size_t jk, std::size_t n, double sign) {
  return std::polar(1.0, sign * 2.0 * std::numbers::pi * static_cast<double>(jk % n) / static_cast<double>(n));
}

inline std::vector<cplx> naive_dft(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<cplx> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < n; ++j) out[k] += x[j] * twiddle(j * k, n, -1.0);
  }
  return out;
}

inline std::vector<cplx> naive_idft(std::span<const cplx> X) {
  const std::size_t n = X.size();
  std::vector<cplx> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) out[j] += X[k] * twiddle(j * k, n, 1.0);
    out[j] /= static_cast<double>(n);
  }
  return out;
}

// Circulant matrix with first column `col`: C(i, j) = col[(i - j) mod n].
inline Eigen::MatrixXd circulant(std::span<const double> col) {
  const std::size_t n = col.size();
  Eigen::MatrixXd c(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) c(i, j) = col[(i + n - j) % n];
  }
  return c;
}

// Dense covariance built from the eigenvalues via the direct inverse DFT.
inline Eigen::MatrixXd covariance_from_bins(std::span<const double> bins) {
  std::vector<cplx> s(bins.begin(), bins.end());
  const auto row = naive_idft(s);
  std::vector<double> col(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) col[i] = row[i].real();
  return circulant(col);
}

inline Eigen::VectorXd vec(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> stdvec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double l2(std::span<const double> a) {
  double ss = 0.0;
  for (double v : a) ss += v * v;
  return std::sqrt(ss);
}

// max |a - b| / max(|a|, |b|)
inline double rel_err(std::span<const double> a, std::span<const double> b) {
  const double scale = std::max(max_abs(a), max_abs(b));
  return scale == 0.0 ? 0.0 : max_abs_diff(a, b) / scale;
}

inline std::vector<double> central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                              const Eigen::VectorXd& x, double h = 1e-5) {
  std::vector<double> g(static_cast<std::size_t>(x.size()));
  Eigen::VectorXd p = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    p(i) = x(i) + h;
    const double up = f(p);
    p(i) = x(i) - h;
    const double down = f(p);
    p(i) = x(i);
    g[static_cast<std::size_t>(i)] = (up - down) / (2.0 * h);
  }
  return g;
}

// -1/2 r^T M^-1 r for r = y - (a g x + b), M = a P a^T + s^2 I: the
// explicit Gaussian log-likelihood of y given x_t, up to a constant.
inline double gaussian_log_likelihood(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const Eigen::MatrixXd& g,
                                      const Eigen::MatrixXd& post_cov, double sigma_y, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& y) {
  const Eigen::VectorXd r = y - a * (g * x) - b;
  const auto m = a.rows();
  const Eigen::MatrixXd cov = a * post_cov * a.transpose() + sigma_y * sigma_y * Eigen::MatrixXd::Identity(m, m);
  return -0.5 * r.dot(cov.llt().solve(r));
}

// Denoiser matrices from the textbook formulas.
struct DenseDenoiser {
  Eigen::MatrixXd gamma, cov;
};

inline DenseDenoiser dense_denoiser(const Eigen::MatrixXd& sigma, double ab) {
  const auto n = sigma.rows();
  const Eigen::MatrixXd inv = (ab * sigma + (1.0 - ab) * Eigen::MatrixXd::Identity(n, n)).inverse();
  DenseDenoiser d;
  d.gamma = std::sqrt(ab) * sigma * inv;
  d.cov = sigma - std::sqrt(ab) * d.gamma * sigma;
  return d;
}

}  // namespace fgps::testing
