#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sloaci/plm.hpp"

namespace sloaci {

enum class TestKind { clt, bf, asy, eb };

TestKind parse_test_kind(const std::string& name);
std::string to_string(TestKind kind);

struct TestConfig {
  TestKind test = TestKind::asy;
  double alpha = 0.05;
  std::size_t t0 = 50;
  std::size_t horizon = 2500;
  /// Literal mixing parameter for ASY; unset means choose it at t0.
  std::optional<double> rho;
  /// Used for ASY when the variance at t0 is zero and no literal rho is set.
  double rho_fallback = 1.0;
  double c = 0.5;
  double nu0_sq = 1.0;
  double xi_hat0 = 0.0;
  /// EB outcome bounds; unset means calibrate from the first stages.
  std::optional<double> lo, hi;
  /// Number of SDs added on each side of the calibration range.
  double calibration_sd_multiple = 3.0;

  void validate() const;
};

struct IntervalPoint {
  std::size_t t = 0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  bool contains(double v) const { return lower <= v && v <= upper; }
};

using IntervalSeries = std::vector<IntervalPoint>;

/// Standard normal quantile, accurate to about 1e-15 in the central region
/// and well below 1e-9 in the tails.
double normal_quantile(double p);

IntervalPoint clt_interval(double tau_hat, double varsigma_hat, std::size_t t, double alpha);
IntervalPoint bf_interval(double tau_hat, double varsigma_hat, std::size_t t, double alpha, std::size_t horizon);
double asy_rho_opt(std::size_t t, double varsigma2_hat, double alpha);
IntervalPoint asy_interval(double tau_hat, double varsigma2_hat, std::size_t t, double rho, double alpha);

/// -log(1 - lambda) - lambda.
double psi_e(double lambda);

struct EBState {
  std::size_t t = 0;
  double sum_lambda_xi = 0.0;
  double sum_lambda_weight = 0.0;  // sum lambda / (k + 1)
  double sum_penalty = 0.0;        // sum (xi - xi_hat_prev)^2 psi_E(lambda)
  double sum_dev_sq = 0.0;         // sum (xi_j - xi_bar_j)^2, frozen per stage
  double sum_xi = 0.0;
  double last_lambda = 0.0;
};

/// Consumes one pseudo-outcome already expressed on the unit scale.
IntervalPoint eb_update(EBState& state, double phi, double pi, double alpha, const TestConfig& cfg);

struct StopResult {
  std::size_t stage = 0;
  bool censored = false;
};

/// First t >= t0 whose interval excludes tau_h0, else the horizon (censored).
StopResult stopping_time(const IntervalSeries& series, double tau_h0, std::size_t t0, std::size_t horizon);

/// Tracks the first exit of several null values from one test's intervals.
class ExitTracker {
 public:
  ExitTracker(std::vector<double> nulls, std::size_t t0);
  void observe(const IntervalPoint& p);
  /// 0 when the null has not been excluded.
  const std::vector<std::size_t>& exits() const { return exits_; }
  const std::vector<double>& nulls() const { return nulls_; }

 private:
  std::vector<double> nulls_;
  std::vector<std::size_t> exits_;
  std::size_t t0_;
};

/// Affine map of outcomes onto [0, 1] for the empirical-Bernstein test.
struct Rescaling {
  double lo = 0.0, hi = 1.0;
  std::size_t clamps = 0;

  double width() const { return hi - lo; }
  double map(double v);
};

/// Bounds from the calibration outcomes: min/max widened by `sd_multiple`
/// sample SDs on each side.
Rescaling calibrate_rescaling(std::span<const double> outcomes, double sd_multiple);

/// One sequential test over a replication. CLT, BF and ASY consume the
/// running estimate; EB consumes the stage records once bounds are known.
class SequentialMonitor {
 public:
  explicit SequentialMonitor(TestConfig cfg);

  const TestConfig& config() const { return cfg_; }

  /// Running-estimate tests: call once per stage t with the current
  /// tau_hat and varsigma2_hat. Returns the interval for stages >= t0.
  std::optional<IntervalPoint> update(std::size_t t, double tau_hat, double varsigma2_hat);

  bool calibrated() const { return rescaling_.has_value(); }
  /// EB: fixes the bounds from the calibration outcomes (ignored when both
  /// bounds are configured).
  void calibrate(std::span<const double> outcomes);
  /// EB: consumes one stage; returns the interval in the original scale.
  IntervalPoint observe(const StageRecord& record);

  std::size_t clamp_count() const { return rescaling_ ? rescaling_->clamps : 0; }
  std::optional<Rescaling> rescaling() const { return rescaling_; }
  std::optional<double> asy_rho() const { return rho_; }

 private:
  TestConfig cfg_;
  std::optional<double> rho_;
  std::optional<Rescaling> rescaling_;
  EBState eb_;
};

}  // namespace sloaci
