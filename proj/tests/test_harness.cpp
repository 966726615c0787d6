#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fgps/harness.hpp"
#include "fgps/oracle_suite.hpp"
#include "test_support.hpp"

using namespace fgps;
namespace fs = std::filesystem;

namespace {

std::string golden(const std::string& name) { return read_text_file(fs::path(FGPS_TEST_DATA_DIR) / name); }

fs::path temp_path(const std::string& name) { return fs::temp_directory_path() / ("fgps_harness_" + name); }

ExperimentConfig small_sweep() {
  auto cfg = defaults_for(Subcommand::gap_sweep);
  cfg.n = 32;
  cfg.count = 20;
  cfg.T = 50;
  cfg.grid = 6;
  cfg.kernel_sigmas = {2.0};
  cfg.threads = 1;
  return cfg;
}

}  // namespace

// ============================================================================
// timestep grid
// ============================================================================

TEST(TimestepGrid, EndpointsAndSpacing) {
  const auto g = timestep_grid(200, 50);
  ASSERT_EQ(g.size(), 50u);
  EXPECT_EQ(g.front(), 1u);
  EXPECT_EQ(g.back(), 200u);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_GT(g[i], g[i - 1]);
}

TEST(TimestepGrid, DeduplicatesShortSchedules) {
  const auto g = timestep_grid(5, 50);
  EXPECT_EQ(g, (std::vector<std::size_t>{1, 2, 3, 4, 5}));
  EXPECT_EQ(timestep_grid(7, 1), std::vector<std::size_t>{7});
  EXPECT_THROW(timestep_grid(0, 3), InvalidParameter);
}

// ============================================================================
// config
// ============================================================================

TEST(Config, TextRoundTrip) {
  for (auto sub : {Subcommand::gap_sweep, Subcommand::restore_bench, Subcommand::sample}) {
    auto cfg = defaults_for(sub);
    cfg.dc_power = 3.25;
    cfg.beta_max = 0.07;
    cfg.kernel_sigmas = {0.1, 1.0 / 3.0};
    cfg.out = "x.csv";
    cfg.timing = true;
    EXPECT_EQ(parse_config(to_text(cfg)), cfg);
  }
  const ExperimentConfig plain;
  EXPECT_EQ(parse_config(to_text(plain)), plain);
}

TEST(Config, ParsesCommentsListsAndAuto) {
  const auto cfg = parse_config(
      "# comment\n\n  n = 64 \noperator = gaussian, haze\nkernel_sigma = 2,3\nbeta_max = auto\n"
      "curriculum = exponential\nnoise_reading = ve\nmethod = dps\ntheoretical_st = true\n");
  EXPECT_EQ(cfg.n, 64u);
  EXPECT_EQ(cfg.operators, (std::vector<std::string>{"gaussian", "haze"}));
  EXPECT_EQ(cfg.kernel_sigmas, (std::vector<double>{2.0, 3.0}));
  EXPECT_FALSE(cfg.beta_max.has_value());
  EXPECT_EQ(cfg.curriculum, FrequencyCurriculum::Kind::exponential);
  EXPECT_EQ(cfg.noise_reading, NoiseReading::variance_exploding);
  EXPECT_TRUE(cfg.theoretical_st);
  EXPECT_DOUBLE_EQ(schedule_of(cfg).beta_at(cfg.T), 0.02 * 1000.0 / 200.0);
}

TEST(Config, LaterValuesOverrideBase) {
  auto base = defaults_for(Subcommand::restore_bench);
  const auto cfg = parse_config("kappa_start = 2\n", base);
  EXPECT_EQ(cfg.kappa_start, 2.0);
  EXPECT_EQ(cfg.kappa_end, base.kappa_end);
  EXPECT_EQ(cfg.methods, base.methods);
}

TEST(Config, RejectsBadInput) {
  ExperimentConfig cfg;
  EXPECT_THROW(set_config_value(cfg, "wibble", "1"), InvalidConfiguration);
  EXPECT_THROW(set_config_value(cfg, "n", "12x"), InvalidConfiguration);
  EXPECT_THROW(set_config_value(cfg, "n", "-3"), InvalidConfiguration);
  EXPECT_THROW(set_config_value(cfg, "sigma_y", "abc"), InvalidConfiguration);
  EXPECT_THROW(set_config_value(cfg, "timing", "maybe"), InvalidConfiguration);
  EXPECT_THROW(parse_config("n 64\n"), InvalidConfiguration);
  EXPECT_THROW(load_config("/nonexistent/fgps.cfg"), IoError);
}

TEST(Config, ValidateCatchesInconsistentSettings) {
  auto cfg = small_sweep();
  cfg.operators = {"mystery"};
  EXPECT_THROW(validate(cfg), InvalidConfiguration);
  cfg = small_sweep();
  cfg.tau_start = 0.8;
  cfg.tau_end = 0.2;
  EXPECT_THROW(validate(cfg), InvalidConfiguration);
  cfg = small_sweep();
  cfg.methods = {"ilvr"};
  EXPECT_THROW(run_gap_sweep(cfg), InvalidConfiguration);
}

TEST(Config, LoadFromFile) {
  const auto path = temp_path("cfg.txt");
  {
    std::ofstream out(path);
    out << "n = 48\nseed = 7\n";
  }
  const auto cfg = load_config(path.string(), defaults_for(Subcommand::gap_sweep));
  EXPECT_EQ(cfg.n, 48u);
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.kernel_sigmas, defaults_for(Subcommand::gap_sweep).kernel_sigmas);
  fs::remove(path);
}

TEST(Config, FullScale) {
  auto cfg = defaults_for(Subcommand::gap_sweep);
  cfg.beta_max = 0.5;
  apply_full_scale(cfg);
  EXPECT_EQ(cfg.n, 2000u);
  EXPECT_EQ(cfg.count, 10000u);
  EXPECT_EQ(cfg.T, 1000u);
  EXPECT_NEAR(schedule_of(cfg).beta_at(1000), 0.02, 1e-15);
}

// ============================================================================
// reports
// ============================================================================

TEST(Reports, HeadersMatchGoldenFiles) {
  EXPECT_EQ(emit_csv(GapReport{}), golden("gap_report_header.csv"));
  EXPECT_EQ(emit_csv(RestorationReport{}), golden("restoration_report_header.csv"));
  EXPECT_EQ(std::string(kSampleHeader) + "\n", golden("sample_header.csv"));
}

TEST(Reports, GapCsvRoundTrip) {
  GapReport r;
  r.rows.push_back({1, 0.9999, "gaussian", 2.0, "dps", 0.1, 0.1 / 3.0, 1e-300, 10});
  r.rows.push_back({200, 1.0 / 7.0, "haze", 0.0, "fgps", 123456.789, std::sqrt(2.0), 0.0, 1});
  EXPECT_EQ(parse_gap_csv(emit_csv(r)), r);
  EXPECT_TRUE(parse_gap_csv(emit_csv(GapReport{})).rows.empty());
}

TEST(Reports, RestorationCsvRoundTrip) {
  RestorationReport r;
  r.rows.push_back({0, "dps", "highpass", 0.25, 0.125, 3.5, std::nullopt});
  r.rows.push_back({1, "posterior-mean", "highpass", 1.0 / 3.0, 0.0, 0.0, 0.5});
  const auto text = emit_csv(r);
  EXPECT_NE(text.find("3.5,\n"), std::string::npos);
  EXPECT_EQ(parse_restoration_csv(text).rows, r.rows);
}

TEST(Reports, RejectsMalformedCsv) {
  EXPECT_THROW(parse_gap_csv("t,wrong\n"), IoError);
  EXPECT_THROW(parse_gap_csv(std::string(kGapReportHeader) + "\n1,2,3\n"), IoError);
  EXPECT_THROW(parse_gap_csv(std::string(kGapReportHeader) + "\nx,1,a,1,dps,1,1,1,1\n"), IoError);
}

TEST(Reports, PlotIsWellFormedSvg) {
  const auto report = run_gap_sweep(small_sweep());
  const auto svg = emit_plot(report);
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_NE(svg.find("<polyline"), std::string::npos);
  EXPECT_EQ(svg.find("nan"), std::string::npos);
  EXPECT_NE(emit_plot(GapReport{}).find("</svg>"), std::string::npos);
}

TEST(Reports, AtomicWriteReplacesFile) {
  const auto path = temp_path("atomic.csv");
  write_file_atomic(path, "first\n");
  write_file_atomic(path, "second\n");
  EXPECT_EQ(read_text_file(path), "second\n");
  EXPECT_FALSE(fs::exists(path.string() + ".tmp"));
  fs::remove(path);
  EXPECT_THROW(read_text_file(path), IoError);
  EXPECT_THROW(write_file_atomic("/nonexistent/dir/x.csv", "x"), IoError);
}

// ============================================================================
// drivers
// ============================================================================

TEST(GapSweep, RowLayoutAndSorting) {
  const auto cfg = small_sweep();
  const auto report = run_gap_sweep(cfg);
  // 2 operator kinds x 1 width x 2 methods x 6 steps
  ASSERT_EQ(report.rows.size(), 24u);
  auto sorted = report;
  sort_rows(sorted);
  EXPECT_EQ(sorted, report);
  for (const auto& r : report.rows) {
    EXPECT_EQ(r.count, cfg.count);
    EXPECT_NEAR(r.rms, r.mean_l2 / std::sqrt(32.0), 1e-12 * r.mean_l2);
    EXPECT_EQ(r.alpha_bar, schedule_of(cfg).alpha_bar_at(r.t));
    EXPECT_EQ(r.kernel_sigma, 2.0);
    EXPECT_TRUE(std::isfinite(r.mean_l2) && r.mean_l2 >= 0.0 && r.std_l2 >= 0.0);
  }
}

TEST(GapSweep, DeterministicAcrossThreads) {
  auto cfg = small_sweep();
  const auto a = run_gap_sweep(cfg);
  cfg.threads = 3;
  const auto b = run_gap_sweep(cfg);
  EXPECT_EQ(emit_csv(a), emit_csv(b));
  cfg.seed = 43;
  EXPECT_NE(emit_csv(run_gap_sweep(cfg)), emit_csv(a));
}

TEST(GapSweep, GapsShrinkTowardTheDataEnd) {
  const auto report = run_gap_sweep(small_sweep());
  std::map<std::string, std::pair<double, double>> ends;  // (t=1, t=T)
  for (const auto& r : report.rows) {
    auto& e = ends[r.op + r.method];
    if (r.t == 1) e.first = r.mean_l2;
    if (r.t == 50) e.second = r.mean_l2;
  }
  for (const auto& [key, e] : ends) EXPECT_LT(e.first, e.second) << key;
}

TEST(GapSweep, HazeAndBoxOperators) {
  auto cfg = small_sweep();
  cfg.operators = {"haze", "box"};
  cfg.box_width = 4;
  const auto report = run_gap_sweep(cfg);
  ASSERT_EQ(report.rows.size(), 24u);
  for (const auto& r : report.rows) EXPECT_EQ(r.kernel_sigma, 0.0);
}

TEST(RestorationBench, OneRowPerTrialAndMethod) {
  auto cfg = defaults_for(Subcommand::restore_bench);
  cfg.n = 32;
  cfg.T = 40;
  cfg.trials = 3;
  cfg.threads = 1;
  const auto report = run_restoration_bench(cfg);
  ASSERT_EQ(report.rows.size(), 15u);
  const auto text = emit_csv(report);
  EXPECT_EQ(parse_restoration_csv(text).rows, report.rows);
  EXPECT_EQ(emit_csv(run_restoration_bench(cfg)), text);
}

TEST(Sample, MatchesBenchmarkTrialZero) {
  auto cfg = defaults_for(Subcommand::sample);
  cfg.n = 32;
  cfg.T = 40;
  const auto s = run_sample(cfg);
  const auto prior = build_prior(spectrum_of(cfg));
  const auto op = make_operator(operator_descriptors(cfg).front());
  const auto trial = make_trial(prior, op, cfg.sigma_y, cfg.seed, 0);
  EXPECT_EQ(s.trial.x0, trial.x0);
  EXPECT_EQ(s.x_hat.size(), 32u);
  EXPECT_TRUE(s.trajectory.steps.empty());
  const auto csv = emit_sample_csv(s);
  EXPECT_EQ(csv.rfind(golden("sample_header.csv"), 0), 0u);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), 33u);

  cfg.methods = {"posterior-mean"};
  const auto pm = run_sample(cfg);
  EXPECT_EQ(pm.x_hat, pm.posterior_mean);
  cfg.methods = {"fgps"};
  cfg.trajectory = "traj.bin";
  EXPECT_EQ(run_sample(cfg).trajectory.steps.size(), 40u);
}

TEST(SelfCheck, QuickSuitePasses) {
  for (const auto& r : oracle::run_all(true)) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}
