#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sloaci/config.hpp"
#include "sloaci/design.hpp"
#include "sloaci/dgp.hpp"
#include "sloaci/metrics.hpp"
#include "sloaci/seqtest.hpp"

namespace sloaci {

/// Environment variable giving the default output directory.
inline constexpr const char* kOutDirEnv = "SLOACI_OUT_DIR";

struct RunConfig {
  int scenario_id = 1;
  /// Parameter overrides applied on top of the built-in scenario.
  std::optional<double> rho0, rho1, sigma_y0, sigma_y1, sigma_s0, sigma_s1;

  DesignPolicy design;
  std::vector<TestConfig> tests;
  std::vector<double> tau_h0;
  /// Stages used to calibrate the EB outcome bounds.
  std::size_t eb_calibration = 20;

  std::size_t horizon = 2500;
  std::size_t checkpoint_every = 50;
  std::size_t reps = 500;
  std::uint64_t seed = 20240601;
  std::size_t workers = 0;  // 0 = hardware concurrency
  std::string out_dir;
  bool trajectories = false;
  std::size_t trace_rep = 0;
  std::size_t oracle_mc_draws = 1'000'000;

  void validate() const;
  ScenarioSpec scenario() const;
  std::vector<std::size_t> checkpoints() const;

  /// Builds a config from key=value settings; defaults fill the rest.
  static RunConfig from_map(const ConfigMap& map);
  /// Complete key=value echo that from_map() reads back to the same config.
  ConfigMap to_map() const;
};

struct TrajectoryRow {
  std::size_t t = 0;
  double pi = 0.5;
  Arm z = Arm::control;
  double phi = 0.0, tau_hat = 0.0, varsigma2_hat = 0.0;
};

struct IntervalRow {
  TestKind test = TestKind::asy;
  IntervalPoint point;
};

struct ReplicationResult {
  RepOutcome outcome;
  std::vector<TrajectoryRow> trajectory;  // when requested
  std::vector<IntervalRow> intervals;     // traced replication only
};

/// Scenario and oracle quantities shared read-only by every replication.
struct SuiteContext {
  ScenarioSpec spec;
  OracleQuantities oracle;

  explicit SuiteContext(const RunConfig& cfg);
};

ReplicationResult run_replication(const RunConfig& cfg, const SuiteContext& ctx, std::size_t rep,
                                  bool keep_trajectory = false, bool trace_intervals = false);

struct SuiteResult {
  std::vector<ReplicationResult> reps;  // canonical rep order
};

/// Runs every replication on a worker pool. The lowest-index failure is
/// rethrown after all workers stop.
SuiteResult run_suite(const RunConfig& cfg, const SuiteContext& ctx);

struct VarianceRow {
  std::size_t T = 0;
  double normalized_variance = 0.0;
  double regret = 0.0;
};

struct TestingRow {
  TestKind test = TestKind::asy;
  double tau_h0 = 0.0;
  std::size_t T = 0;
  double miscoverage = 0.0;
  StoppingSummary stopping;
};

std::vector<VarianceRow> summarize_variance(const RunConfig& cfg, const SuiteContext& ctx, const SuiteResult& r);
std::vector<TestingRow> summarize_testing(const RunConfig& cfg, const SuiteContext& ctx, const SuiteResult& r);

/// Writes variance.csv, testing.csv (when tests are configured),
/// intervals.csv, trajectories.csv (when requested) and metadata.txt.
/// Removes what it wrote if any write fails.
void write_outputs(const RunConfig& cfg, const SuiteContext& ctx, const SuiteResult& result,
                   const std::filesystem::path& dir);

/// Formats a double with round-trip precision.
std::string format_number(double v);

}  // namespace sloaci
