#include "sloaci/dgp.hpp"

#include <cmath>
#include <random>

namespace sloaci {

namespace {

struct ScenarioParams {
  double rho0, rho1, sigma_Y0, sigma_Y1;
};

constexpr ScenarioParams kBuiltIns[4] = {
    {0.8, 0.8, 0.4, 0.6},
    {0.5, -0.5, 0.4, 0.6},
    {0.8, 0.8, 0.2, 0.8},
    {0.0, 0.0, 0.4, 0.6},
};

ArmErrors gaussian_errors(Rng& rng, double rho, double sigma_y, double sigma_s) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double g1 = normal(rng);
  const double g2 = normal(rng);
  return {sigma_y * g1, sigma_s * (rho * g1 + std::sqrt(1.0 - rho * rho) * g2)};
}

}  // namespace

void ScenarioSpec::validate() const {
  if (covariate_dim < 1 || covariate_dim > kMaxDim - 1)
    throw InvalidInput("scenario: covariate_dim must be in [1, 3]");
  if (!(std::abs(rho0) < 1.0) || !(std::abs(rho1) < 1.0))
    throw InvalidInput("scenario: |rho| must be < 1");
  if (!(sigma_Y0 > 0.0) || !(sigma_Y1 > 0.0) || !(sigma_S0 > 0.0) || !(sigma_S1 > 0.0))
    throw InvalidInput("scenario: standard deviations must be positive");
  if (!sample_covariate || !m_Y0 || !m_Y1 || !m_S0 || !m_S1)
    throw InvalidInput("scenario: mean functions and covariate law must be set");
}

double ScenarioSpec::gamma(Arm z) const { return rho(z) * sigma_Y(z) / sigma_S(z); }

double ScenarioSpec::residual_sd(Arm z) const {
  const double r = rho(z);
  return std::sqrt(1.0 - r * r) * sigma_Y(z);
}

ScenarioSpec built_in_scenario(int id) {
  if (id < 1 || id > 4) throw InvalidInput("unknown built-in scenario id " + std::to_string(id));
  const ScenarioParams& p = kBuiltIns[id - 1];

  ScenarioSpec spec;
  spec.id = id;
  spec.name = "scenario" + std::to_string(id);
  spec.covariate_dim = 1;
  spec.covariate_law = "uniform(0,2)";
  spec.sample_covariate = [](Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 2.0);
    return Point(u(rng));
  };
  spec.m_Y1 = [](const Point& x) { return x[0] * x[0] + 3.0 * x[0] + 1.0; };
  spec.m_Y0 = [](const Point& x) { return x[0] * x[0] + x[0] + 2.0; };
  spec.m_S1 = [](const Point& x) { return std::sin(2.0 * x[0]); };
  spec.m_S0 = [](const Point& x) { return std::sin(x[0]); };
  spec.rho0 = p.rho0;
  spec.rho1 = p.rho1;
  spec.sigma_Y0 = p.sigma_Y0;
  spec.sigma_Y1 = p.sigma_Y1;
  spec.sigma_S0 = p.sigma_Y0;
  spec.sigma_S1 = p.sigma_Y1;
  // m_Y1 - m_Y0 = 2x - 1 with X ~ U(0, 2): mean 1, variance 4 * (4 / 12).
  spec.tau0_closed_form = 1.0;
  spec.mean_gap_variance_closed_form = 4.0 / 3.0;
  return spec;
}

Unit sample_unit(const ScenarioSpec& spec, Rng& rng) {
  Unit u;
  u.x = spec.sample_covariate(rng);
  ArmErrors e0, e1;
  if (spec.error_sampler) {
    e0 = spec.error_sampler(rng, Arm::control);
    e1 = spec.error_sampler(rng, Arm::treated);
  } else {
    e0 = gaussian_errors(rng, spec.rho0, spec.sigma_Y0, spec.sigma_S0);
    e1 = gaussian_errors(rng, spec.rho1, spec.sigma_Y1, spec.sigma_S1);
  }
  u.y0 = spec.m_Y0(u.x) + e0.y;
  u.s0 = spec.m_S0(u.x) + e0.s;
  u.y1 = spec.m_Y1(u.x) + e1.y;
  u.s1 = spec.m_S1(u.x) + e1.s;
  return u;
}

double true_mu(const ScenarioSpec& spec, Arm z, const Point& x, double s0, double s1) {
  const double g = spec.gamma(z);
  const double s = z == Arm::treated ? s1 : s0;
  return spec.m_Y(z)(x) - g * spec.m_S(z)(x) + g * s;
}

OracleQuantities oracle_quantities(const ScenarioSpec& spec, std::size_t mc_draws) {
  OracleQuantities q;
  q.gamma0 = spec.gamma(Arm::control);
  q.gamma1 = spec.gamma(Arm::treated);
  q.sigma0 = spec.residual_sd(Arm::control);
  q.sigma1 = spec.residual_sd(Arm::treated);
  q.pi_star = q.sigma1 / (q.sigma0 + q.sigma1);

  const double surrogate_part = q.gamma1 * q.gamma1 * spec.sigma_S1 * spec.sigma_S1 +
                                q.gamma0 * q.gamma0 * spec.sigma_S0 * spec.sigma_S0;
  double tau0 = 0.0;
  double gap_var = 0.0;
  if (spec.tau0_closed_form && spec.mean_gap_variance_closed_form) {
    tau0 = *spec.tau0_closed_form;
    gap_var = *spec.mean_gap_variance_closed_form;
    q.cate_dispersion = gap_var + surrogate_part;
  } else {
    if (mc_draws < 10'000) throw InvalidInput("oracle_quantities: need at least 1e4 Monte Carlo draws");
    // Welford accumulators over the mean gap m_Y1(X) - m_Y0(X) and over the
    // CATE tau(X, S) drawn through the scenario's own unit sampler.
    Rng rng(kOracleMonteCarloSeed);
    double gap_mean = 0.0, gap_m2 = 0.0, cate_mean = 0.0, cate_m2 = 0.0;
    for (std::size_t i = 1; i <= mc_draws; ++i) {
      const Unit u = sample_unit(spec, rng);
      const double n = static_cast<double>(i);
      const double g = spec.m_Y1(u.x) - spec.m_Y0(u.x);
      const double dg = g - gap_mean;
      gap_mean += dg / n;
      gap_m2 += dg * (g - gap_mean);
      const double c = true_mu(spec, Arm::treated, u.x, u.s0, u.s1) - true_mu(spec, Arm::control, u.x, u.s0, u.s1);
      const double dc = c - cate_mean;
      cate_mean += dc / n;
      cate_m2 += dc * (c - cate_mean);
    }
    const double n = static_cast<double>(mc_draws);
    tau0 = spec.tau0_closed_form.value_or(gap_mean);
    gap_var = spec.mean_gap_variance_closed_form.value_or(gap_m2 / n);
    q.cate_dispersion = cate_m2 / n;
    q.monte_carlo = true;
    q.mc_seed = kOracleMonteCarloSeed;
    q.mc_draws = mc_draws;
  }
  q.tau0 = tau0;

  const double sum = q.sigma0 + q.sigma1;
  q.bound_with_surrogates = sum * sum + q.cate_dispersion;
  const double sum_y = spec.sigma_Y0 + spec.sigma_Y1;
  q.bound_without_surrogates = sum_y * sum_y + gap_var;
  return q;
}

}  // namespace sloaci
