#pragma once

#include <span>
#include <vector>

#include "sloaci/seqtest.hpp"

namespace sloaci {

/// First-exit stages of one test for each monitored null value (0 = never).
struct TestDigest {
  TestKind test = TestKind::asy;
  std::vector<double> nulls;
  std::vector<std::size_t> exits;
};

struct RepOutcome {
  std::size_t rep = 0;
  std::vector<std::size_t> checkpoints;
  std::vector<double> tau_hats;        // one per checkpoint
  std::vector<double> varsigma2_hats;  // one per checkpoint
  std::vector<TestDigest> tests;
  std::size_t eb_clamps = 0;
};

/// T times the unbiased sample variance across replications.
double normalized_variance(std::span<const double> tau_hats, std::size_t T);

/// T * (normalized_variance - varsigma_star^2), i.e. T^2 (V_T - V_T*).
double empirical_regret(double normalized_var, double v_star, std::size_t T);

/// Fraction of exits at or before T.
double miscoverage(std::span<const std::size_t> exits, std::size_t T);

struct StoppingSummary {
  double power = 0.0;
  double mean_stop = 0.0;
  double se_stop = 0.0;
  double censored_frac = 0.0;
};

/// Runs without an exit by T count as stopping at T.
StoppingSummary power_and_stopping(std::span<const std::size_t> exits, std::size_t T);

}  // namespace sloaci
