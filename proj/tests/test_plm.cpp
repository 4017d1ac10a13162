#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sloaci/dgp.hpp"
#include "sloaci/plm.hpp"

using namespace sloaci;

namespace {

void push(History& h, double x, Arm z, double s0, double s1, double y) {
  StageRecord r;
  r.t = h.size() + 1;
  r.x = Point(x);
  r.z = z;
  r.s0 = s0;
  r.s1 = s1;
  r.y = y;
  r.pi = 0.5;
  h.append(r);
}

// Noiseless Y = 2 S(1) with zero mean functions, every stage on arm 1.
History noiseless_gamma2(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 2);
  std::normal_distribution<double> g;
  History h;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = g(rng);
    push(h, u(rng), Arm::treated, g(rng), s, 2 * s);
  }
  return h;
}

History scenario_history(int id, std::size_t n, std::uint64_t seed) {
  const auto spec = built_in_scenario(id);
  Rng rng(seed);
  std::bernoulli_distribution coin(0.5);
  History h;
  for (std::size_t i = 0; i < n; ++i) {
    const Unit u = sample_unit(spec, rng);
    const Arm z = coin(rng) ? Arm::treated : Arm::control;
    push(h, u.x[0], z, u.s0, u.s1, u.y(z));
  }
  return h;
}

}  // namespace

TEST_CASE("history bookkeeping") {
  History h;
  push(h, 0.1, Arm::control, 0, 0, 1);
  push(h, 0.2, Arm::treated, 0, 0, 1);
  push(h, 0.3, Arm::treated, 0, 0, 1);
  CHECK(h.count(Arm::control) + h.count(Arm::treated) == h.size());
  CHECK(h.prefix(2).count(Arm::treated) == 1);
  StageRecord bad;
  bad.t = 7;
  CHECK_THROWS_AS(h.append(bad), InvalidInput);
  bad.t = 4;
  bad.pi = 1.0;
  CHECK_THROWS_AS(h.append(bad), InvalidInput);
  CHECK(parse_backend("profile") == Backend::profile);
  CHECK_THROWS_AS(parse_backend("forest"), InvalidInput);
}

TEST_CASE("Robinson recovers an exact linear surrogate relation") {
  const History h = noiseless_gamma2(60, 1);
  const FitSettings set;
  const ArmFit f = fit_nonparametric(h, Arm::treated, set);
  CHECK(f.gamma_hat() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.sigma_hat() == doctest::Approx(0.0).scale(1).epsilon(1e-12));
  CHECK(f.predict_mu(Point(1.0), 0.0, 1.5) == doctest::Approx(3.0));
}

TEST_CASE("orthogonal residuals give zero slope") {
  History h;
  const double s[] = {1, -1, 1, -1}, y[] = {1, 1, -1, -1};
  for (int i = 0; i < 4; ++i) push(h, 1.0, Arm::control, s[i], 0, y[i]);
  push(h, 1.0, Arm::treated, 0, 0, 0);
  push(h, 1.0, Arm::treated, 0, 0, 0);
  const ArmFit f = fit_nonparametric(h, Arm::control, FitSettings{});
  CHECK(f.gamma_hat() == doctest::Approx(0.0).scale(1));
}

TEST_CASE("degenerate surrogate residuals fall back to zero slope") {
  History h;
  for (int i = 0; i < 6; ++i) push(h, 0.2 * i, i % 2 ? Arm::treated : Arm::control, 0.5, 0.5, i);
  const auto fits = fit_arms(h, Backend::nonparametric, FitSettings{});
  CHECK(fits[0].gamma_hat() == 0.0);
  CHECK(std::isfinite(fits[1].predict_mu(Point(9.0), 1, 1)));
}

TEST_CASE("constant shift of Y leaves the slope unchanged on a same-X design") {
  History a, b;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int i = 0; i < 30; ++i) {
    const double s = g(rng), y = 1.3 * s + g(rng);
    const Arm z = i % 2 ? Arm::treated : Arm::control;
    push(a, 0.7, z, s, s, y);
    push(b, 0.7, z, s, s, y + 12.5);
  }
  CHECK(fit_nonparametric(a, Arm::control, {}).gamma_hat() ==
        doctest::Approx(fit_nonparametric(b, Arm::control, {}).gamma_hat()).epsilon(1e-10));
}

TEST_CASE("insufficient arm data") {
  History h;
  push(h, 0.1, Arm::control, 0, 0, 1);
  push(h, 0.2, Arm::treated, 0, 0, 1);
  push(h, 0.3, Arm::treated, 0, 0, 1);
  CHECK_THROWS_AS(fit_nonparametric(h, Arm::control, {}), InsufficientData);
  CHECK_NOTHROW(fit_nonparametric(h, Arm::treated, {}));
}

TEST_CASE("empty neighbourhood predicts gamma times the surrogate") {
  const History h = noiseless_gamma2(40, 2);
  const ArmFit f = fit_nonparametric(h, Arm::treated, {});
  CHECK(f.predict_mu(Point(100.0), 0.0, 1.25) == doctest::Approx(f.gamma_hat() * 1.25));
}

TEST_CASE("refit from a truncated history is bit-identical") {
  const History full = scenario_history(1, 400, 9);
  History part;
  for (std::size_t i = 0; i < 250; ++i) part.append(full[i]);
  const auto a = fit_arms(full.prefix(250), Backend::nonparametric, {});
  const auto b = fit_arms(part, Backend::nonparametric, {});
  for (int k = 0; k < 2; ++k) {
    CHECK(a[k].gamma_hat() == b[k].gamma_hat());
    CHECK(a[k].sigma_hat() == b[k].sigma_hat());
    for (double x : {0.1, 0.9, 1.7}) CHECK(a[k].predict_mu(Point(x), 0.3, -0.2) == b[k].predict_mu(Point(x), 0.3, -0.2));
  }
}

TEST_CASE("Robinson slope is consistent on scenario 1") {
  int close = 0;
  for (int run = 0; run < 200; ++run) {
    const History h = scenario_history(1, 5000, 1000 + run);
    if (std::abs(fit_nonparametric(h, Arm::treated, {}).gamma_hat() - 0.8) < 0.05) ++close;
  }
  CHECK(close >= 190);
}

TEST_CASE("linear backend") {
  SUBCASE("noiseless linear data") {
    History h;
    for (int i = 1; i <= 8; ++i) push(h, 0.25 * i, i % 2 ? Arm::treated : Arm::control, 0.5 * 0.25 * i,
                                      -1.5 * 0.25 * i, 3.0 * 0.25 * i);
    const ArmFit f = fit_linear(h, Arm::treated, {});
    CHECK(f.gamma_hat() == 0.0);
    CHECK(f.sigma_hat() == doctest::Approx(0.0).scale(1));
    for (const auto& r : h.records())
      if (r.z == Arm::treated) CHECK(f.predict_mu(r.x, r.s0, r.s1) == doctest::Approx(r.y));
    CHECK(f.predict_mu(Point(0.0), 0.0, 2.0) == doctest::Approx(f.gamma_hat() * 2.0));
  }
  SUBCASE("pure slope") {
    History h;
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (int i = 0; i < 40; ++i) {
      const double e = g(rng);
      push(h, 1.0 + 0.01 * i, i % 2 ? Arm::treated : Arm::control, e, e, 3.0 * e);
    }
    // Both projections on the same rows make the residual relation exact.
    FitSettings same_rows;
    same_rows.assigned_surrogate_only = true;
    CHECK(fit_linear(h, Arm::control, same_rows).gamma_hat() == doctest::Approx(3.0).epsilon(1e-10));
  }
  SUBCASE("rank deficiency") {
    History h;
    for (int i = 0; i < 6; ++i) push(h, 0.0, i % 2 ? Arm::treated : Arm::control, 0, 0, 1);
    CHECK_THROWS_AS(fit_linear(h, Arm::control, {}), SingularDesign);
  }
  SUBCASE("consistency on a linear model") {
    double sum = 0;
    for (int run = 0; run < 200; ++run) {
      History h;
      std::mt19937_64 rng(500 + run);
      std::uniform_real_distribution<double> u(0, 2);
      std::normal_distribution<double> g;
      for (int i = 0; i < 5000; ++i) {
        const double x = u(rng), s = 0.7 * x + g(rng);
        push(h, x, i % 2 ? Arm::treated : Arm::control, s, s, 1.5 * x + 0.5 * s + 0.3 * g(rng));
      }
      sum += fit_linear(h, Arm::control, {}).gamma_hat();
    }
    CHECK(std::abs(sum / 200 - 0.5) < 0.02);
  }
}

TEST_CASE("profile least squares") {
  const History h = noiseless_gamma2(60, 5);
  const ArmFit f = fit_profile(h, Arm::treated, {});
  CHECK(std::abs(f.gamma_hat() - 2.0) < 1e-6);
  CHECK(f.predict_mu(Point(1.0), 0.0, 1.5) == doctest::Approx(3.0).epsilon(1e-6));

  const History s1 = scenario_history(1, 2000, 77);
  const ArmFit p = fit_profile(s1, Arm::treated, {});
  const ArmFit r = fit_nonparametric(s1, Arm::treated, {});
  CHECK(std::abs(p.gamma_hat() - r.gamma_hat()) < 0.05);

  History steep = noiseless_gamma2(30, 6);
  for (std::size_t i = 0; i < steep.size(); ++i) steep.mutable_record(i).y *= 10;  // slope 20
  try {
    fit_profile(steep, Arm::treated, {});
    FAIL("expected OptimizationError");
  } catch (const OptimizationError& e) {
    CHECK(!e.grid().empty());
  }
}

TEST_CASE("golden-section minimizer returns the best evaluated point") {
  std::vector<std::pair<double, double>> trace;
  const double x = golden_section_minimize([](double g) { return (g - 1.3) * (g - 1.3) + std::sin(5 * g) * 0.01; },
                                           -10, 10, 1e-6, &trace);
  for (const auto& [g, v] : trace) CHECK((x - 1.3) * (x - 1.3) + std::sin(5 * x) * 0.01 <= v);
  CHECK_THROWS_AS(golden_section_minimize([](double g) { return g; }, -1, 1, 1e-6), OptimizationError);
}

TEST_CASE("baseline backends") {
  const History h = scenario_history(4, 600, 8);
  const auto rar = fit_arms(h, Backend::outcome_only, {});
  const auto rars = fit_arms(h, Backend::augmented, {});
  for (int k = 0; k < 2; ++k) {
    CHECK(rar[k].gamma_hat() == 0.0);
    CHECK(rars[k].gamma_hat() == 0.0);
    CHECK(rar[k].sigma_hat() > 0.2);
    CHECK(rar[k].sigma_hat() < 1.0);
    CHECK(std::isfinite(rars[k].predict_mu(Point(1.0), 0.1, 0.2)));
  }
  // With no surrogate signal the X-only fit should sit near sigma_Y.
  CHECK(std::abs(rar[1].sigma_hat() - 0.6) < 0.1);
}
