#include "sloaci/estimator.hpp"

#include <algorithm>
#include <cmath>

namespace sloaci {

double single_stage_phi(Arm z, double y, double pi, double mu0_hat, double mu1_hat) {
  if (!(pi > 0.0 && pi < 1.0)) throw InvalidInput("single_stage_phi: allocation must lie in (0, 1)");
  double phi = mu1_hat - mu0_hat;
  if (z == Arm::treated)
    phi += (y - mu1_hat) / pi;
  else
    phi -= (y - mu0_hat) / (1.0 - pi);
  return phi;
}

double running_ate(std::span<const double> phis) {
  if (phis.empty()) throw InvalidInput("running_ate: empty sequence");
  CompensatedSum s;
  for (double p : phis) s.add(p);
  return s.value() / static_cast<double>(phis.size());
}

double running_variance(std::span<const double> phis, double tau_hat) {
  if (phis.empty()) throw InvalidInput("running_variance: empty sequence");
  CompensatedSum s;
  for (double p : phis) s.add((p - tau_hat) * (p - tau_hat));
  return s.value() / static_cast<double>(phis.size());
}

double oracle_phi(const Unit& unit, Arm z, const ScenarioSpec& spec, double pi_star) {
  const double mu0 = true_mu(spec, Arm::control, unit.x, unit.s0, unit.s1);
  const double mu1 = true_mu(spec, Arm::treated, unit.x, unit.s0, unit.s1);
  return single_stage_phi(z, unit.y(z), pi_star, mu0, mu1);
}

double oracle_phi(const Unit& unit, Arm z, const ScenarioSpec& spec) {
  const double s0 = spec.residual_sd(Arm::control), s1 = spec.residual_sd(Arm::treated);
  return oracle_phi(unit, z, spec, s1 / (s0 + s1));
}

double batchwise_ate(const History& history, std::size_t T0) {
  const std::size_t T = history.size();
  if (T <= T0) throw InvalidInput("batchwise_ate: need more stages than the initialization length");
  CompensatedSum init, rest;
  for (std::size_t i = 0; i < T; ++i) {
    const StageRecord& r = history[i];
    if (i < T0)
      init.add(r.z == Arm::treated ? r.y / 0.5 : -r.y / 0.5);
    else
      rest.add(single_stage_phi(r.z, r.y, r.pi, r.mu0_hat, r.mu1_hat));
  }
  const double head = T0 == 0 ? 0.0 : init.value() / static_cast<double>(T0);
  return head + rest.value() / static_cast<double>(T - T0);
}

double RunningEstimate::tau_hat() const {
  if (n_ == 0) throw InsufficientData("RunningEstimate: no observations");
  return sum_.value() / static_cast<double>(n_);
}

double RunningEstimate::varsigma2_hat() const {
  const double m = tau_hat();
  return std::max(0.0, sum_sq_.value() / static_cast<double>(n_) - m * m);
}

}  // namespace sloaci
