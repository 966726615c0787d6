#pragma once

// Dense O(n^3) reference implementations of the analytic scores. They use
// explicit matrices and linear solves only, never the DFT diagonalization,
// so they serve as an independent route for cross-checks and timing.

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <vector>

#include "fgps/analytic_scores.hpp"
#include "fgps/error.hpp"
#include "fgps/operators.hpp"
#include "fgps/spectral_prior.hpp"

namespace fgps::dense {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Denoiser {
  MatrixXd gamma;  // sqrt(ab) Sigma (ab Sigma + (1 - ab) I)^-1
  MatrixXd cov;    // Sigma - sqrt(ab) Gamma Sigma = (1 - ab) Sigma (ab Sigma + (1 - ab) I)^-1
};

inline Denoiser denoiser(const MatrixXd& sigma, double alpha_bar) {
  const auto n = sigma.rows();
  const MatrixXd marginal = alpha_bar * sigma + (1.0 - alpha_bar) * MatrixXd::Identity(n, n);
  // Gamma^T = sqrt(ab) marginal^-1 Sigma, and Gamma is symmetric.
  const MatrixXd solved = marginal.ldlt().solve(sigma);
  Denoiser d;
  d.gamma = std::sqrt(alpha_bar) * 0.5 * (solved + solved.transpose());
  // the second form avoids cancelling two O(Sigma) terms when ab is near 1
  d.cov = (1.0 - alpha_bar) * 0.5 * (solved + solved.transpose());
  return d;
}

inline VectorXd vec(std::span<const double> v) { return detail::to_eigen(v); }

inline VectorXd denoise_mean(const MatrixXd& sigma, double alpha_bar, const VectorXd& x_t) {
  return denoiser(sigma, alpha_bar).gamma * x_t;
}

inline VectorXd unconditional_score(const MatrixXd& sigma, double alpha_bar, const VectorXd& x_t) {
  const auto n = sigma.rows();
  const MatrixXd marginal = alpha_bar * sigma + (1.0 - alpha_bar) * MatrixXd::Identity(n, n);
  return -marginal.ldlt().solve(x_t);
}

// A(x) = a x + b with a the (dense) linear part.
struct AffineOperator {
  MatrixXd a;
  VectorXd b;
};

inline AffineOperator affine(const ForwardOperator& op) {
  return {dense_linear_part(op), detail::to_eigen(affine_offset(op))};
}

inline VectorXd true_likelihood_score(const MatrixXd& sigma, const AffineOperator& op, double sigma_y,
                                      double alpha_bar, const VectorXd& x_t, const VectorXd& y) {
  const auto d = denoiser(sigma, alpha_bar);
  const VectorXd delta = y - op.a * (d.gamma * x_t) - op.b;
  const auto m = op.a.rows();
  const MatrixXd cov_y = op.a * d.cov * op.a.transpose() + sigma_y * sigma_y * MatrixXd::Identity(m, m);
  return (op.a * d.gamma).transpose() * cov_y.ldlt().solve(delta);
}

inline VectorXd dps_likelihood_score(const MatrixXd& sigma, const AffineOperator& op, double sigma_y,
                                     double alpha_bar, const VectorXd& x_t, const VectorXd& y) {
  const auto d = denoiser(sigma, alpha_bar);
  const VectorXd delta = y - op.a * (d.gamma * x_t) - op.b;
  return (op.a * d.gamma).transpose() * delta / (sigma_y * sigma_y);
}

// (C A Gamma)^T (sy^2 C C^T)^+ (C y - C A mu), with the Moore-Penrose inverse
// taken from an SVD.
inline VectorXd fgps_likelihood_score(const MatrixXd& sigma, const AffineOperator& op, double sigma_y,
                                      double alpha_bar, const VectorXd& x_t, const VectorXd& y, const MatrixXd& c) {
  const auto d = denoiser(sigma, alpha_bar);
  const VectorXd mu = d.gamma * x_t;
  const MatrixXd s = sigma_y * sigma_y * c * c.transpose();
  const Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(s);
  const MatrixXd s_pinv = cod.pseudoInverse();
  const VectorXd residual = c * y - c * (op.a * mu + op.b);
  return (c * op.a * d.gamma).transpose() * (s_pinv * residual);
}

inline VectorXd dps_gap(const MatrixXd& sigma, const AffineOperator& op, double sigma_y, double alpha_bar,
                        const VectorXd& x_t, const VectorXd& y) {
  const auto d = denoiser(sigma, alpha_bar);
  const VectorXd delta = y - op.a * (d.gamma * x_t) - op.b;
  const auto m = op.a.rows();
  const MatrixXd lifted = op.a * d.cov * op.a.transpose();
  const MatrixXd cov_y = lifted + sigma_y * sigma_y * MatrixXd::Identity(m, m);
  // sy^-2 I - cov_y^-1 = cov_y^-1 (A Sigma0t A^T) / sy^2
  const VectorXd w = cov_y.ldlt().solve(lifted * delta) / (sigma_y * sigma_y);
  return (op.a * d.gamma).transpose() * w;
}

struct Posterior {
  VectorXd mean;
  MatrixXd cov;
};

inline Posterior exact_posterior(const MatrixXd& sigma, const AffineOperator& op, double sigma_y, const VectorXd& y) {
  const auto m = op.a.rows();
  const MatrixXd cov_y = op.a * sigma * op.a.transpose() + sigma_y * sigma_y * MatrixXd::Identity(m, m);
  const auto ldlt = cov_y.ldlt();
  const MatrixXd gain = sigma * op.a.transpose() * ldlt.solve(MatrixXd::Identity(m, m));
  Posterior p;
  p.mean = gain * (y - op.b);
  p.cov = sigma - gain * op.a * sigma;
  p.cov = 0.5 * (p.cov + p.cov.transpose());
  return p;
}

// Explicit circulant projection for a binary mask.
inline MatrixXd mask_matrix(const FrequencyMask& mask) { return dense_matrix(mask_as_operator(mask)); }

}  // namespace fgps::dense
