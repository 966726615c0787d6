#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "fgps/samplers.hpp"
#include "test_support.hpp"

using namespace fgps;
namespace ft = fgps::testing;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Same score as the analytic model, without the exact Jacobian product.
class OpaqueScore final : public ScoreModel {
 public:
  explicit OpaqueScore(StationaryGaussianPrior prior) : inner_(std::move(prior)) {}
  std::size_t size() const override { return inner_.size(); }
  std::vector<double> score(std::span<const double> x, DiffusionTime time) const override {
    return inner_.score(x, time);
  }

 private:
  AnalyticGaussianScore inner_;
};

class PoisonedScore final : public ScoreModel {
 public:
  explicit PoisonedScore(std::size_t n) : n_(n) {}
  std::size_t size() const override { return n_; }
  std::vector<double> score(std::span<const double> x, DiffusionTime time) const override {
    std::vector<double> s(x.begin(), x.end());
    if (time.step == 3) s[0] = std::numeric_limits<double>::quiet_NaN();
    return s;
  }

 private:
  std::size_t n_;
};

GuidanceConfig guidance(GuidanceMethod method, double kappa = 1.0) {
  GuidanceConfig g;
  g.method = method;
  g.step_size = {StepSizeSchedule::Kind::cosine, kappa, kappa};
  if (method == GuidanceMethod::fgps) {
    g.curriculum.kind = FrequencyCurriculum::Kind::linear;
    g.curriculum.tau_start = 0.1;
    g.curriculum.tau_end = 0.5;
  }
  return g;
}

StationaryGaussianPrior power_law(std::size_t n, double beta = 2.0) {
  return build_prior(make_power_law_spectrum(1.0, beta, n));
}

}  // namespace

// ============================================================================
// Tweedie estimate
// ============================================================================

TEST(Tweedie, NoiselessStepReturnsInput) {
  const AnalyticGaussianScore model(power_law(16));
  const auto x = ft::random_vector(16, 1);
  EXPECT_LT(ft::max_abs_diff(tweedie_estimate(model, x, {1, 1.0}), x), 1e-12);
}

TEST(Tweedie, MatchesDenoisingPosteriorAndDenseGamma) {
  const auto prior = power_law(32, 2.5);
  const AnalyticGaussianScore model(prior);
  const auto sigma = ft::covariance_from_bins(prior.eigenvalues());
  const auto x = ft::random_vector(32, 2);
  for (double ab : {0.999, 0.5, 0.01}) {
    const auto mu = tweedie_estimate(model, x, {1, ab});
    EXPECT_LT(ft::rel_err(mu, denoise_posterior(prior, ab, x).mu), 1e-10);
    const VectorXd dense = ft::dense_denoiser(sigma, ab).gamma * ft::vec(x);
    EXPECT_LT(ft::rel_err(mu, ft::stdvec(dense)), 1e-9);
  }
}

TEST(Tweedie, IdentityPriorHalfNoise) {
  const AnalyticGaussianScore model(StationaryGaussianPrior::flat(8));
  const auto x = ft::random_vector(8, 3);
  const auto mu = tweedie_estimate(model, x, {1, 0.5});
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(mu[i], std::sqrt(0.5) * x[i], 1e-14);
}

TEST(Tweedie, RejectsZeroAlphaBar) {
  const AnalyticGaussianScore model(StationaryGaussianPrior::flat(8));
  EXPECT_THROW(tweedie_estimate(model, std::vector<double>(8, 1.0), {1, 0.0}), InvalidParameter);
}

TEST(Tweedie, NumericJacobianProductMatchesExact) {
  const auto prior = power_law(16);
  const AnalyticGaussianScore model(prior);
  const auto x = ft::random_vector(16, 4), v = ft::random_vector(16, 5);
  const DiffusionTime time{10, 0.4};
  const auto exact = *model.tweedie_vjp(x, time, v);
  EXPECT_LT(ft::rel_err(numeric_tweedie_vjp(model, x, time, v), exact), 1e-7);
  const VectorXd dense = ft::dense_denoiser(ft::covariance_from_bins(prior.eigenvalues()), 0.4).gamma.transpose() * ft::vec(v);
  EXPECT_LT(ft::rel_err(exact, ft::stdvec(dense)), 1e-9);
}

// ============================================================================
// ancestral step
// ============================================================================

TEST(DdpmStep, ZeroRateStepIsNoOp) {
  VarianceSchedule s;
  s.T = 2;
  s.beta = {0.2, 0.0};
  s.alpha_bar = {0.8, 0.8};
  s.sigma_tilde = {0.0, 0.0};
  const auto x = ft::random_vector(8, 1), mu = ft::random_vector(8, 2), z = ft::random_vector(8, 3);
  EXPECT_EQ(ddpm_step(x, mu, s, 2, z), x);
}

TEST(DdpmStep, CoefficientIdentity) {
  const auto s = desk_variance_schedule(50);
  const auto v = ft::random_vector(8, 4), z = ft::random_vector(8, 5);
  for (std::size_t t : {1u, 2u, 25u, 50u}) {
    const double ab = s.alpha_bar_at(t), prev = t == 1 ? 1.0 : s.alpha_bar_at(t - 1), alpha = 1 - s.beta_at(t);
    const double cx = std::sqrt(alpha) * (1 - prev) / (1 - ab), cmu = std::sqrt(prev) * (1 - alpha) / (1 - ab);
    const double sig = t == 1 ? 0.0 : std::sqrt((1 - prev) / (1 - ab) * s.beta_at(t));
    const auto out = ddpm_step(v, v, s, t, z);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(out[i], (cx + cmu) * v[i] + sig * z[i], 1e-14);
  }
}

TEST(DdpmStep, FinalStepReturnsPosteriorMean) {
  const auto s = desk_variance_schedule(40);
  const auto x = ft::random_vector(8, 6), mu = ft::random_vector(8, 7), z = ft::random_vector(8, 8);
  EXPECT_LT(ft::max_abs_diff(ddpm_step(x, mu, s, 1, z), mu), 1e-15);
}

TEST(GuidedSample, TwoStepHandRecursion) {
  const std::size_t n = 6;
  const auto prior = power_law(n);
  const AnalyticGaussianScore model(prior);
  const auto s = ddpm_variance_schedule(2, 0.3, 0.6);
  const MatrixXd sigma = ft::covariance_from_bins(prior.eigenvalues());
  const std::uint64_t seed = 77;

  Rng rng(derive_seed(seed, {stream::kSampler}));
  std::vector<double> x2(n), z2(n), z1(n);
  fill_standard_normal(rng, x2);
  fill_standard_normal(rng, z2);
  fill_standard_normal(rng, z1);

  const double a1 = 0.7, a2 = 0.4, ab1 = a1, ab2 = a1 * a2;
  auto tweedie = [&](const VectorXd& x, double ab) {
    const MatrixXd cov = ab * sigma + (1 - ab) * MatrixXd::Identity(n, n);
    const VectorXd score = -cov.llt().solve(x);
    return VectorXd((x + (1 - ab) * score) / std::sqrt(ab));
  };
  const VectorXd mu2 = tweedie(ft::vec(x2), ab2);
  const double sig2 = std::sqrt((1 - ab1) / (1 - ab2) * (1 - a2));
  const VectorXd x1 = std::sqrt(a2) * (1 - ab1) / (1 - ab2) * ft::vec(x2) + std::sqrt(ab1) * (1 - a2) / (1 - ab2) * mu2 +
                      sig2 * ft::vec(z2);
  const VectorXd x0 = tweedie(x1, ab1);

  Measurement none;
  auto g = guidance(GuidanceMethod::none);
  g.record = true;
  const auto traj = guided_sample(none, identity_operator(n), model, s, g, seed);
  ASSERT_EQ(traj.steps.size(), 2u);
  EXPECT_EQ(traj.steps[0].x_t, x2);
  EXPECT_LT(ft::max_abs_diff(traj.steps[0].mu, ft::stdvec(mu2)), 1e-12);
  EXPECT_LT(ft::max_abs_diff(traj.steps[1].x_t, ft::stdvec(x1)), 1e-12);
  EXPECT_LT(ft::max_abs_diff(traj.x0, ft::stdvec(x0)), 1e-12);
}

// ============================================================================
// unconditional sampling
// ============================================================================

TEST(GuidedSample, UnguidedIdentityPriorMoments) {
  const std::size_t n = 6, count = 10000;
  const AnalyticGaussianScore model(StationaryGaussianPrior::flat(n));
  const auto s = desk_variance_schedule(200);
  Measurement none;
  VectorXd mean = VectorXd::Zero(n);
  MatrixXd second = MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < count; ++i) {
    const VectorXd x = ft::vec(guided_sample(none, identity_operator(n), model, s, guidance(GuidanceMethod::none), i).x0);
    mean += x;
    second += x * x.transpose();
  }
  mean /= count;
  const MatrixXd cov = second / count - mean * mean.transpose();
  // scalar linear chain: x_{t-1} = g_t x_t + sigma_t z with g_t = c_x + c_mu sqrt(ab_t)
  double var = 1.0;
  for (std::size_t t = s.T; t >= 1; --t) {
    const double ab = s.alpha_bar_at(t), prev = t == 1 ? 1.0 : s.alpha_bar_at(t - 1), alpha = 1 - s.beta_at(t);
    const double g = std::sqrt(alpha) * (1 - prev) / (1 - ab) + std::sqrt(prev) * (1 - alpha) / (1 - ab) * std::sqrt(ab);
    var = g * g * var + (t == 1 ? 0.0 : (1 - prev) / (1 - ab) * s.beta_at(t));
  }
  EXPECT_GT(var, 0.9);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_LT(std::abs(mean(i)), 0.05);
    for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(cov(i, j), i == j ? var : 0.0, 0.05);
  }
}

TEST(GuidedSample, UnguidedPowerMatchesSpectrum) {
  const std::size_t n = 64, count = 10000;
  const auto prior = power_law(n);
  const AnalyticGaussianScore model(prior);
  const auto s = desk_variance_schedule(200);
  Measurement none;
  SignalEnsemble e(count, n);
  for (std::size_t i = 0; i < count; ++i) {
    const auto x = guided_sample(none, identity_operator(n), model, s, guidance(GuidanceMethod::none), 500 + i).x0;
    std::copy(x.begin(), x.end(), e.row(i).begin());
  }
  const auto psd = empirical_psd(e);
  for (std::size_t k = 1; k < n; ++k) EXPECT_NEAR(psd[k] / prior.eigenvalue(k), 1.0, 0.10) << "bin " << k;
}

// ============================================================================
// guidance
// ============================================================================

TEST(Guidance, GradientMatchesFiniteDifferences) {
  const std::size_t n = 16;
  const auto prior = power_law(n);
  const AnalyticGaussianScore model(prior);
  const OpaqueScore opaque(prior);
  for (const ForwardOperator& op :
       {ForwardOperator(high_pass_kernel(n, 2.0)), ForwardOperator(directional_box_kernel(n, 3)),
        ForwardOperator(make_haze_operator(n))}) {
    const auto x = ft::random_vector(n, 1), y = ft::random_vector(n, 2);
    const DiffusionTime time{5, 0.6};
    for (const auto& mask : {all_pass_mask(n), low_pass_mask(n, 0.4)}) {
      auto loss = [&](const VectorXd& v) {
        const auto mu = tweedie_estimate(model, ft::stdvec(v), time);
        const auto amu = apply(op, mu);
        std::vector<double> r(n);
        for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - amu[i];
        const auto f = apply_mask(mask, r);
        double ss = 0.0;
        for (double q : f) ss += q * q;
        return ss;
      };
      const auto fd = ft::central_difference(loss, ft::vec(x));
      const auto g = guidance_gradient(op, model, x, time, y, mask);
      EXPECT_LT(ft::rel_err(g.grad, fd), 1e-6) << operator_id(op);
      EXPECT_NEAR(g.residual_norm * g.residual_norm, loss(ft::vec(x)), 1e-10);
      EXPECT_LT(ft::rel_err(guidance_gradient(op, opaque, x, time, y, mask).grad, g.grad), 1e-6);
    }
  }
}

TEST(Guidance, SmallStepDoesNotIncreaseFilteredResidual) {
  const std::size_t n = 64;
  const auto prior = power_law(n);
  const AnalyticGaussianScore model(prior);
  const auto s = desk_variance_schedule(200);
  for (const ForwardOperator& op : {ForwardOperator(high_pass_kernel(n, 5.0)), ForwardOperator(gaussian_blur_kernel(n, 3.0)),
                                    ForwardOperator(make_haze_operator(n))}) {
    const auto x0 = sample_prior(prior, 1, 3).values;
    const auto y = measure(op, x0, 0.05, 4).y;
    for (std::size_t t : {200u, 150u, 100u, 50u, 10u, 1u}) {
      const DiffusionTime time{t, s.alpha_bar_at(t)};
      const auto x = ft::random_vector(n, t);
      for (double tau : {1.0, 0.3, 0.05}) {
        const auto mask = low_pass_mask(n, tau);
        const auto g = guidance_gradient(op, model, x, time, y, mask);
        if (g.residual_norm == 0.0) continue;
        std::vector<double> moved(x);
        for (std::size_t i = 0; i < n; ++i) moved[i] -= 1e-3 / g.residual_norm * g.grad[i];
        EXPECT_LE(guidance_gradient(op, model, moved, time, y, mask).residual_norm, g.residual_norm)
            << operator_id(op) << " t=" << t << " tau=" << tau;
      }
    }
  }
}

TEST(Guidance, AllPassFgpsReproducesDpsBitForBit) {
  const std::size_t n = 64;
  const auto prior = power_law(n);
  const AnalyticGaussianScore model(prior);
  const auto s = desk_variance_schedule(50);
  for (const ForwardOperator& op : {ForwardOperator(high_pass_kernel(n, 5.0)), ForwardOperator(make_haze_operator(n))}) {
    const auto m = measure(op, sample_prior(prior, 1, 1).values, 0.05, 2);
    for (bool theoretical : {false, true}) {
      auto dps = guidance(GuidanceMethod::dps, 2.0);
      auto fgps = guidance(GuidanceMethod::fgps, 2.0);
      fgps.curriculum = fixed_curriculum(1.0);
      dps.record = fgps.record = true;
      dps.use_theoretical_St = fgps.use_theoretical_St = theoretical;
      const auto a = guided_sample(m, op, model, s, dps, 9);
      const auto b = guided_sample(m, op, model, s, fgps, 9);
      EXPECT_EQ(a.x0, b.x0);
      ASSERT_EQ(a.steps.size(), b.steps.size());
      for (std::size_t i = 0; i < a.steps.size(); ++i) {
        EXPECT_EQ(a.steps[i].x_t, b.steps[i].x_t);
        EXPECT_EQ(a.steps[i].residual_norm, b.steps[i].residual_norm);
      }
    }
  }
}

TEST(Guidance, DeterministicAndSeedSensitive) {
  const std::size_t n = 32;
  const auto prior = power_law(n);
  const AnalyticGaussianScore model(prior);
  const auto s = desk_variance_schedule(40);
  const ForwardOperator op = high_pass_kernel(n, 3.0);
  const auto m = measure(op, sample_prior(prior, 1, 1).values, 0.05, 2);
  for (auto method : {GuidanceMethod::none, GuidanceMethod::dps, GuidanceMethod::fgps, GuidanceMethod::ilvr}) {
    const auto g = guidance(method);
    EXPECT_EQ(guided_sample(m, op, model, s, g, 5).x0, guided_sample(m, op, model, s, g, 5).x0);
    EXPECT_NE(guided_sample(m, op, model, s, g, 5).x0, guided_sample(m, op, model, s, g, 6).x0);
  }
}

TEST(Guidance, GuidanceReducesMeasurementResidual) {
  const std::size_t n = 64;
  const auto prior = power_law(n);
  const AnalyticGaussianScore model(prior);
  const auto s = desk_variance_schedule(100);
  const ForwardOperator op = gaussian_blur_kernel(n, 2.0);
  double guided = 0.0, free = 0.0;
  for (std::uint64_t i = 0; i < 10; ++i) {
    const auto x0 = sample_prior(prior, 1, 10 + i).values;
    const auto m = measure(op, x0, 0.05, 20 + i);
    for (auto method : {GuidanceMethod::dps, GuidanceMethod::none}) {
      const auto x = guided_sample(m, op, model, s, guidance(method), 30 + i).x0;
      const auto ax = apply(op, x);
      double ss = 0.0;
      for (std::size_t j = 0; j < n; ++j) ss += std::pow(m.y[j] - ax[j], 2);
      (method == GuidanceMethod::dps ? guided : free) += std::sqrt(ss);
    }
  }
  EXPECT_LT(guided, 0.5 * free);
}

TEST(Guidance, ZeroResidualSkipsUpdate) {
  const std::size_t n = 16;
  const auto prior = power_law(n);
  const AnalyticGaussianScore model(prior);
  const auto s = desk_variance_schedule(40);
  const ForwardOperator zero = CirculantOperator(std::vector<double>(n, 0.0));
  Measurement m{std::vector<double>(n, 0.0), 0.05, "zero", 0};
  const auto base = guided_sample(m, zero, model, s, guidance(GuidanceMethod::none), 3).x0;
  EXPECT_EQ(guided_sample(m, zero, model, s, guidance(GuidanceMethod::dps), 3).x0, base);
  EXPECT_EQ(guided_sample(m, zero, model, s, guidance(GuidanceMethod::fgps), 3).x0, base);
}

TEST(Guidance, IlvrWithZeroStepMatchesUnguided) {
  const std::size_t n = 16;
  const auto prior = power_law(n);
  const AnalyticGaussianScore model(prior);
  const auto s = desk_variance_schedule(40);
  const ForwardOperator op = gaussian_blur_kernel(n, 2.0);
  const auto m = measure(op, sample_prior(prior, 1, 1).values, 0.05, 2);
  const auto base = guided_sample(m, op, model, s, guidance(GuidanceMethod::none), 4).x0;
  EXPECT_EQ(guided_sample(m, op, model, s, guidance(GuidanceMethod::ilvr, 0.0), 4).x0, base);
  EXPECT_NE(guided_sample(m, op, model, s, guidance(GuidanceMethod::ilvr, 1.0), 4).x0, base);
}

TEST(Guidance, LastStepFlag) {
  const std::size_t n = 32;
  const auto prior = power_law(n);
  const AnalyticGaussianScore model(prior);
  const auto s = desk_variance_schedule(30);
  const ForwardOperator op = high_pass_kernel(n, 3.0);
  const auto m = measure(op, sample_prior(prior, 1, 1).values, 0.05, 2);
  auto on = guidance(GuidanceMethod::dps), off = on;
  on.record = off.record = true;
  off.guide_last_step = false;
  const auto a = guided_sample(m, op, model, s, on, 7), b = guided_sample(m, op, model, s, off, 7);
  for (std::size_t i = 0; i < a.steps.size(); ++i) EXPECT_EQ(a.steps[i].x_t, b.steps[i].x_t);
  EXPECT_NE(a.x0, b.x0);
  // without guidance on the last step the output is the final Tweedie mean
  EXPECT_LT(ft::max_abs_diff(b.x0, b.steps.back().mu), 1e-15);
}

TEST(Guidance, TheoreticalStepNeedsMeasurementNoise) {
  const std::size_t n = 16;
  const AnalyticGaussianScore model(power_law(n));
  auto g = guidance(GuidanceMethod::fgps);
  g.use_theoretical_St = true;
  Measurement m{std::vector<double>(n, 1.0), 0.0, "identity", 0};
  EXPECT_THROW(guided_sample(m, identity_operator(n), model, desk_variance_schedule(40), g, 1), SingularityError);
}

TEST(Guidance, NumericJacobianFallbackTracksExact) {
  const std::size_t n = 16;
  const auto prior = power_law(n);
  const AnalyticGaussianScore model(prior);
  const OpaqueScore opaque(prior);
  const auto s = desk_variance_schedule(40);
  const ForwardOperator op = high_pass_kernel(n, 2.0);
  const auto m = measure(op, sample_prior(prior, 1, 1).values, 0.05, 2);
  const auto g = guidance(GuidanceMethod::fgps);
  EXPECT_LT(ft::rel_err(guided_sample(m, op, opaque, s, g, 3).x0, guided_sample(m, op, model, s, g, 3).x0), 1e-5);
}

TEST(Guidance, NonFiniteIterateAborts) {
  const PoisonedScore model(8);
  Measurement none;
  EXPECT_THROW(guided_sample(none, identity_operator(8), model, desk_variance_schedule(40), guidance(GuidanceMethod::none), 1),
               NumericalDegeneracy);
}

TEST(Guidance, TrajectoryRecording) {
  const std::size_t n = 8, T = 40;
  const AnalyticGaussianScore model(power_law(n));
  Measurement none;
  auto g = guidance(GuidanceMethod::none);
  g.record = true;
  const auto traj = guided_sample(none, identity_operator(n), model, desk_variance_schedule(T), g, 1);
  ASSERT_EQ(traj.steps.size(), T);
  for (std::size_t i = 0; i < T; ++i) EXPECT_EQ(traj.steps[i].t, T - i);
  const auto e = trajectory_signals(traj);
  EXPECT_EQ(e.count, T);
  EXPECT_EQ(std::vector<double>(e.row(3).begin(), e.row(3).end()), traj.steps[3].x_t);
  g.record = false;
  EXPECT_TRUE(guided_sample(none, identity_operator(n), model, desk_variance_schedule(T), g, 1).steps.empty());
}

TEST(Guidance, MethodNames) {
  for (auto m : {GuidanceMethod::none, GuidanceMethod::dps, GuidanceMethod::fgps, GuidanceMethod::ilvr}) {
    EXPECT_EQ(parse_guidance_method(method_name(m)), m);
  }
  EXPECT_EQ(parse_restoration_method("posterior-mean"), RestorationMethod::posterior_mean);
  EXPECT_THROW(parse_guidance_method("magic"), InvalidParameter);
}

// ============================================================================
// benchmark
// ============================================================================

namespace {

BenchmarkSettings settings(std::size_t T, std::size_t threads = 1) {
  BenchmarkSettings b;
  b.schedule = desk_variance_schedule(T);
  b.curriculum.kind = FrequencyCurriculum::Kind::linear;
  b.curriculum.tau_start = 10.0 / 256.0;
  b.curriculum.tau_end = 75.0 / 256.0;
  b.step_size = {StepSizeSchedule::Kind::cosine, 5.1, 1.1};
  b.threads = threads;
  return b;
}

const std::vector<RestorationMethod> kAllMethods{RestorationMethod::dps, RestorationMethod::fgps,
                                                 RestorationMethod::ilvr, RestorationMethod::none,
                                                 RestorationMethod::posterior_mean};

}  // namespace

TEST(Benchmark, RowLayoutAndPosteriorMeanRow) {
  const std::size_t n = 32;
  const auto prior = power_law(n);
  const ForwardOperator op = high_pass_kernel(n, 5.0);
  const auto report = posterior_benchmark(prior, op, 0.05, kAllMethods, 4, 1, settings(40));
  ASSERT_EQ(report.rows.size(), 20u);
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& r = report.rows[i];
    EXPECT_EQ(r.trial, i / 5);
    EXPECT_EQ(r.method, method_name(kAllMethods[i % 5]));
    EXPECT_EQ(r.op, "highpass");
    EXPECT_FALSE(r.wall_time_s.has_value());
    EXPECT_TRUE(std::isfinite(r.mse_truth) && std::isfinite(r.mse_posterior_mean) && std::isfinite(r.residual_norm));
    if (r.method == "posterior-mean") {
      EXPECT_EQ(r.mse_posterior_mean, 0.0);
    }
  }
}

TEST(Benchmark, TrialsShareMeasurements) {
  const std::size_t n = 16;
  const auto prior = power_law(n);
  const ForwardOperator op = gaussian_blur_kernel(n, 2.0);
  const auto a = make_trial(prior, op, 0.05, 9, 3), b = make_trial(prior, op, 0.05, 9, 3), c = make_trial(prior, op, 0.05, 9, 4);
  EXPECT_EQ(a.x0, b.x0);
  EXPECT_EQ(a.measurement.y, b.measurement.y);
  EXPECT_EQ(a.sampler_seed, b.sampler_seed);
  EXPECT_NE(a.x0, c.x0);
}

TEST(Benchmark, ThreadCountDoesNotChangeResults) {
  const std::size_t n = 32;
  const auto prior = power_law(n);
  const ForwardOperator op = high_pass_kernel(n, 5.0);
  const auto a = posterior_benchmark(prior, op, 0.05, kAllMethods, 6, 3, settings(40, 1));
  const auto b = posterior_benchmark(prior, op, 0.05, kAllMethods, 6, 3, settings(40, 4));
  EXPECT_EQ(a.rows, b.rows);
}

TEST(Benchmark, IdentityOperatorEasyProblem) {
  const std::size_t n = 32;
  const auto prior = power_law(n);
  double trace = 0.0;
  for (double s : prior.eigenvalues()) trace += s;
  const auto report = posterior_benchmark(prior, ForwardOperator(identity_operator(n)), 0.01, kAllMethods, 8, 5,
                                          settings(100));
  std::map<std::string, double> mean;
  for (const auto& r : report.rows) mean[r.method] += r.mse_truth / 8.0;
  for (const auto& [method, mse] : mean) {
    if (method == "none") continue;  // unguided samples ignore y
    EXPECT_LT(mse, trace / n) << method;
  }
  EXPECT_LT(mean["posterior-mean"], 1e-3);
}

TEST(Benchmark, AllPassFgpsRowsEqualDpsRows) {
  const std::size_t n = 32;
  const auto prior = power_law(n);
  const ForwardOperator op = high_pass_kernel(n, 5.0);
  auto cfg = settings(30);
  cfg.curriculum = fixed_curriculum(1.0);
  const auto report = posterior_benchmark(prior, op, 0.05, {RestorationMethod::dps, RestorationMethod::fgps}, 5, 2, cfg);
  for (std::size_t i = 0; i < report.rows.size(); i += 2) {
    EXPECT_EQ(report.rows[i].mse_truth, report.rows[i + 1].mse_truth);
    EXPECT_EQ(report.rows[i].residual_norm, report.rows[i + 1].residual_norm);
  }
}

TEST(Benchmark, TimingColumnOnRequest) {
  const std::size_t n = 16;
  auto cfg = settings(40);
  cfg.timing = true;
  const auto report = posterior_benchmark(power_law(n), ForwardOperator(identity_operator(n)), 0.05,
                                          {RestorationMethod::none}, 2, 1, cfg);
  for (const auto& r : report.rows) EXPECT_TRUE(r.wall_time_s.has_value() && *r.wall_time_s >= 0.0);
}
