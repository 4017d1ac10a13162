#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "sloaci/dgp.hpp"
#include "sloaci/plm.hpp"

namespace sloaci {

/// AIPW pseudo-outcome for one stage:
///   mu1 - mu0 + I(z=1)(y - mu1)/pi - I(z=0)(y - mu0)/(1 - pi).
double single_stage_phi(Arm z, double y, double pi, double mu0_hat, double mu1_hat);

/// Mean of the pseudo-outcomes.
double running_ate(std::span<const double> phis);

/// Plug-in variance with divisor T (not T - 1).
double running_variance(std::span<const double> phis, double tau_hat);

/// Pseudo-outcome with the true conditional means and the oracle allocation.
double oracle_phi(const Unit& unit, Arm z, const ScenarioSpec& spec, double pi_star);
double oracle_phi(const Unit& unit, Arm z, const ScenarioSpec& spec);

/// Two-phase estimator: the IPW mean of the first T0 stages (pi = 1/2) plus
/// the AIPW mean of the remaining stages, each normalized by its own length,
/// exactly as the batch algorithm states it. Requires size() > T0.
double batchwise_ate(const History& history, std::size_t T0);

/// Neumaier-compensated sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      carry_ += (sum_ - t) + v;
    else
      carry_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

/// Running tau_hat and varsigma2_hat over a pseudo-outcome stream.
class RunningEstimate {
 public:
  void add(double phi) {
    sum_.add(phi);
    sum_sq_.add(phi * phi);
    ++n_;
  }
  std::size_t count() const { return n_; }
  double tau_hat() const;
  /// mean(phi^2) - tau_hat^2, clamped at 0.
  double varsigma2_hat() const;

 private:
  CompensatedSum sum_, sum_sq_;
  std::size_t n_ = 0;
};

}  // namespace sloaci
