#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "sloaci/rng.hpp"
#include "sloaci/types.hpp"

namespace sloaci {

/// Outcome and surrogate error for one arm of one unit.
struct ArmErrors {
  double y = 0.0;
  double s = 0.0;
};

using MeanFunction = std::function<double(const Point&)>;
using CovariateSampler = std::function<Point(Rng&)>;
using ErrorSampler = std::function<ArmErrors(Rng&, Arm)>;

/// A data-generating process: additive mean functions for outcome and
/// surrogate in each arm plus a per-arm error law.
struct ScenarioSpec {
  int id = 0;
  std::string name;
  std::size_t covariate_dim = 1;
  std::string covariate_law = "uniform(0,2)";
  CovariateSampler sample_covariate;

  MeanFunction m_Y0, m_Y1, m_S0, m_S1;

  double rho0 = 0.0, rho1 = 0.0;
  double sigma_Y0 = 1.0, sigma_Y1 = 1.0;
  double sigma_S0 = 1.0, sigma_S1 = 1.0;

  /// Optional replacement for the bivariate Gaussian error law. When set it
  /// must still honour the (rho, sigma) moments above for the oracle
  /// quantities to be meaningful.
  ErrorSampler error_sampler;

  /// Closed forms, when known: E[m_Y1(X) - m_Y0(X)] and Var[m_Y1(X) - m_Y0(X)].
  std::optional<double> tau0_closed_form;
  std::optional<double> mean_gap_variance_closed_form;

  void validate() const;

  double rho(Arm z) const { return z == Arm::treated ? rho1 : rho0; }
  double sigma_Y(Arm z) const { return z == Arm::treated ? sigma_Y1 : sigma_Y0; }
  double sigma_S(Arm z) const { return z == Arm::treated ? sigma_S1 : sigma_S0; }
  const MeanFunction& m_Y(Arm z) const { return z == Arm::treated ? m_Y1 : m_Y0; }
  const MeanFunction& m_S(Arm z) const { return z == Arm::treated ? m_S1 : m_S0; }

  /// Linear surrogate coefficient rho_z * sigma_Yz / sigma_Sz.
  double gamma(Arm z) const;
  /// Residual SD of the outcome given (X, S): sqrt(1 - rho^2) * sigma_Y.
  double residual_sd(Arm z) const;
};

/// One arrival with both potential outcomes and both surrogates.
struct Unit {
  Point x;
  double s0 = 0.0, s1 = 0.0;
  double y0 = 0.0, y1 = 0.0;

  double s(Arm z) const { return z == Arm::treated ? s1 : s0; }
  double y(Arm z) const { return z == Arm::treated ? y1 : y0; }
};

struct OracleQuantities {
  double tau0 = 0.0;
  double gamma0 = 0.0, gamma1 = 0.0;
  double sigma0 = 0.0, sigma1 = 0.0;
  double pi_star = 0.5;
  double bound_with_surrogates = 0.0;
  double bound_without_surrogates = 0.0;
  double cate_dispersion = 0.0;

  bool monte_carlo = false;
  std::uint64_t mc_seed = 0;
  std::size_t mc_draws = 0;

  double gain() const { return bound_without_surrogates - bound_with_surrogates; }
};

/// Seed for the Monte Carlo fallback in oracle_quantities().
inline constexpr std::uint64_t kOracleMonteCarloSeed = 0x5eed0a0c1eULL;

/// Scenarios 1-4 of the simulation study. Throws InvalidInput for other ids.
ScenarioSpec built_in_scenario(int id);

Unit sample_unit(const ScenarioSpec& spec, Rng& rng);

/// mu_z(x, s) = m_Yz(x) - gamma_z m_Sz(x) + gamma_z s(z).
double true_mu(const ScenarioSpec& spec, Arm z, const Point& x, double s0, double s1);

/// Monte Carlo is only used for the pieces without a closed form; `mc_draws`
/// must then be at least 1e4.
OracleQuantities oracle_quantities(const ScenarioSpec& spec, std::size_t mc_draws = 1'000'000);

}  // namespace sloaci
