#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sloaci/estimator.hpp"
#include "sloaci/seqtest.hpp"

using namespace sloaci;

TEST_CASE("normal quantile") {
  CHECK(std::abs(normal_quantile(0.975) - 1.959963984540054) < 1e-9);
  CHECK(std::abs(normal_quantile(1 - 1e-5) - 4.264890793922825) < 1e-9);
  CHECK(std::abs(normal_quantile(0.5)) < 1e-12);
  CHECK(std::abs(normal_quantile(1e-10) + 6.361340902404056) < 1e-9);
  for (double p : {0.01, 0.2, 0.37, 0.9})
    CHECK(normal_quantile(p) == doctest::Approx(-normal_quantile(1 - p)).epsilon(1e-12));
  CHECK_THROWS_AS(normal_quantile(0.0), InvalidInput);
  CHECK_THROWS_AS(normal_quantile(1.0), InvalidInput);
}

TEST_CASE("fixed-time and Bonferroni intervals") {
  const auto z = clt_interval(1, 0, 7, 0.05);
  CHECK(z.lower == 1.0);
  CHECK(z.upper == 1.0);
  const auto c = clt_interval(1, 1, 100, 0.05);
  CHECK(std::abs(c.upper - 1.19600) < 1e-4);
  CHECK(std::abs(c.lower - 0.80400) < 1e-4);
  const auto c4 = clt_interval(1, 1, 400, 0.05);
  CHECK((c4.upper - c4.lower) == doctest::Approx((c.upper - c.lower) / 2));

  const auto b = bf_interval(1, 1, 100, 0.05, 2500);
  CHECK(std::abs(b.upper - 1.42649) < 1e-3);
  const auto b1 = bf_interval(1, 1, 1, 0.05, 1);
  CHECK(b1.upper == doctest::Approx(clt_interval(1, 1, 1, 0.05).upper));
  for (std::size_t t : {1, 10, 100, 2500}) CHECK(bf_interval(0, 1, t, 0.05, 2500).upper > clt_interval(0, 1, t, 0.05).upper);
  CHECK_THROWS_AS(bf_interval(1, 1, 2501, 0.05, 2500), InvalidInput);
}

TEST_CASE("asymptotic confidence sequence") {
  const double rho = asy_rho_opt(100, 1, 0.05);
  CHECK(std::abs(rho - 0.28171) < 1e-4);
  CHECK(rho * rho * 100 == doctest::Approx(7.93615).epsilon(1e-5));
  CHECK(asy_rho_opt(400, 1, 0.05) == doctest::Approx(rho / 2));
  CHECK_THROWS_AS(asy_rho_opt(100, 0, 0.05), InvalidInput);

  CHECK(std::abs(asy_interval(1, 1, 100, 0.28171, 0.05).upper - 1.30353) < 1e-3);
  CHECK(std::abs(asy_interval(0, 0, 1, 1, 0.05).upper - 2.4477) < 1e-4);
  double prev = 0;
  for (double v : {0.1, 0.5, 1.0, 2.0, 8.0}) {
    const double w = asy_interval(0, v, 100, 0.3, 0.05).upper;
    CHECK(w > prev);
    prev = w;
  }
  for (std::size_t t : {2, 10, 100, 2500})
    CHECK(asy_interval(0, 1, t, asy_rho_opt(t, 1, 0.05), 0.05).upper > clt_interval(0, 1, t, 0.05).upper);
}

TEST_CASE("empirical-Bernstein building blocks") {
  CHECK(psi_e(0) == 0.0);
  CHECK(std::abs(psi_e(0.5) - 0.19315) < 1e-5);

  const TestConfig cfg;
  EBState s;
  const auto p = eb_update(s, 0.4, 0.5, 0.05, cfg);
  CHECK(s.last_lambda == 0.5);
  // k = 3 at pi = 0.5, so xi = 0.1 and the weight is lambda / 4.
  CHECK(s.sum_lambda_weight == doctest::Approx(0.125));
  CHECK((p.lower + p.upper) / 2 == doctest::Approx(0.4));

  EBState r;
  eb_update(r, 0.4, 0.2, 0.05, cfg);
  // k = 6 at pi = 0.2.
  CHECK(r.sum_lambda_weight == doctest::Approx(0.5 / 7));
  CHECK_THROWS_AS(eb_update(r, 0.4, 1.0, 0.05, cfg), InvalidInput);
}

TEST_CASE("empirical-Bernstein sequence covers on a bounded design") {
  // Outcomes in [0, 1], adaptive-looking allocations, imperfect predictions.
  const int reps = 1000;
  const std::size_t T = 2000;
  const double alpha = 0.05;
  const TestConfig cfg;
  int misses = 0;
  for (int rep = 0; rep < reps; ++rep) {
    std::mt19937_64 rng(9000 + rep);
    std::uniform_real_distribution<double> u(0, 1);
    EBState s;
    bool missed = false;
    for (std::size_t t = 1; t <= T; ++t) {
      const double x = u(rng);
      const double m0 = 0.3 + 0.2 * x, m1 = 0.5 + 0.3 * x;  // tau = 0.2 + 0.1 * 0.5
      const double pi = 0.2 + 0.6 * x;
      const Arm z = u(rng) < pi ? Arm::treated : Arm::control;
      const double mean = z == Arm::treated ? m1 : m0;
      const double y = u(rng) < mean ? 1.0 : 0.0;
      const double phi = single_stage_phi(z, y, pi, 0.5, 0.5);
      const auto p = eb_update(s, phi, pi, alpha, cfg);
      if (!p.contains(0.25)) missed = true;
    }
    misses += missed;
  }
  const double rate = misses / double(reps);
  CHECK(rate <= alpha + 2 * std::sqrt(alpha * (1 - alpha) / reps));
}

TEST_CASE("stopping time") {
  IntervalSeries wide, split;
  for (std::size_t t = 1; t <= 1000; ++t) {
    wide.push_back({t, 0, 2});
    split.push_back(t < 300 ? IntervalPoint{t, 0, 2} : IntervalPoint{t, 0.5, 1.5});
  }
  auto s = stopping_time(wide, 5, 50, 1000);
  CHECK(s.stage == 50);
  CHECK_FALSE(s.censored);
  s = stopping_time(wide, 1, 50, 1000);
  CHECK(s.stage == 1000);
  CHECK(s.censored);
  CHECK(stopping_time(split, 0.2, 50, 1000).stage == 300);

  // Pointwise-wider series never stop earlier.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    IntervalSeries a, b;
    for (std::size_t t = 1; t <= 100; ++t) {
      const double c = u(rng), h = u(rng), extra = u(rng);
      a.push_back({t, c - h, c + h});
      b.push_back({t, c - h - extra, c + h + extra});
    }
    CHECK(stopping_time(b, 0.5, 10, 100).stage >= stopping_time(a, 0.5, 10, 100).stage);
  }

  ExitTracker tr({0.2, 1.0}, 50);
  for (const auto& p : split) tr.observe(p);
  CHECK(tr.exits()[0] == 300);
  CHECK(tr.exits()[1] == 0);
}

TEST_CASE("monitor behaviour") {
  TestConfig cfg;
  cfg.test = TestKind::asy;
  cfg.t0 = 10;
  SequentialMonitor m(cfg);
  CHECK_FALSE(m.update(9, 1, 1).has_value());
  CHECK(m.update(10, 1, 0).has_value());
  CHECK(*m.asy_rho() == cfg.rho_fallback);

  SequentialMonitor a(cfg);
  a.update(10, 1, 2);
  CHECK(*a.asy_rho() == doctest::Approx(asy_rho_opt(10, 2, 0.05)));
  a.update(11, 1, 5);
  CHECK(*a.asy_rho() == doctest::Approx(asy_rho_opt(10, 2, 0.05)));

  const double ys[] = {1, 2, 3, 4};
  const Rescaling r = calibrate_rescaling(ys, 3.0);
  const double sd = std::sqrt(5.0 / 3.0);
  CHECK(r.lo == doctest::Approx(1 - 3 * sd));
  CHECK(r.hi == doctest::Approx(4 + 3 * sd));
  Rescaling c = r;
  CHECK(c.map(r.hi + 1) == 1.0);
  CHECK(c.map(r.lo - 1) == 0.0);
  CHECK(c.clamps == 2);

  TestConfig eb;
  eb.test = TestKind::eb;
  SequentialMonitor e(eb);
  StageRecord rec;
  rec.t = 1;
  rec.pi = 0.5;
  CHECK_THROWS_AS(e.observe(rec), InsufficientData);
}
