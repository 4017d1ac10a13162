#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sloaci/kernel.hpp"

using namespace sloaci;

namespace {

// Independent reference: direct weighted mean with the same conventions.
double brute_force(const std::vector<Point>& pts, const std::vector<double>& r, KernelFamily fam, double h,
                   const Point& x) {
  double num = 0, den = 0, box_sum = 0;
  int box = 0;
  for (std::size_t j = 0; j < pts.size(); ++j) {
    double w = 1;
    bool inside = true;
    for (std::size_t k = 0; k < x.dim; ++k) {
      const double u = (x[k] - pts[j][k]) / h;
      if (std::abs(u) > 1) inside = false;
      if (fam == KernelFamily::gaussian)
        w *= std::exp(-u * u / 2) / std::sqrt(2 * M_PI);
      else if (std::abs(u) > 1)
        w = 0;
      else
        w *= fam == KernelFamily::uniform ? 1.0 : 0.75 * (1 - u * u);
    }
    num += w * r[j];
    den += w;
    if (inside) {
      ++box;
      box_sum += r[j];
    }
  }
  if (fam != KernelFamily::gaussian && den <= 1e-4 * box) return box ? box_sum / box : 0.0;
  return den == 0 ? 0.0 : num / den;
}

}  // namespace

TEST_CASE("kernel profiles") {
  CHECK(kernel_profile(KernelFamily::epanechnikov, 0.0) == 0.75);
  CHECK(kernel_profile(KernelFamily::uniform, 0.0) == 1.0);
  CHECK(kernel_profile(KernelFamily::epanechnikov, 1.0001) == 0.0);
  CHECK(kernel_profile(KernelFamily::uniform, -1.5) == 0.0);
  CHECK(kernel_profile(KernelFamily::gaussian, 3.0) > 0.0);
  CHECK(parse_kernel_family("gaussian") == KernelFamily::gaussian);
  CHECK_THROWS_AS(parse_kernel_family("triweight"), InvalidInput);
}

TEST_CASE("bandwidth rule") {
  CHECK(bandwidth(1, 1, 1, 1) == doctest::Approx(1.0));
  CHECK(bandwidth(1, 8, 1, 1) == doctest::Approx(0.5));
  CHECK(bandwidth(2, 1000, 1, 1) == doctest::Approx(0.2));
  CHECK_THROWS_AS(bandwidth(1, 0, 1, 1), InvalidInput);
}

TEST_CASE("nw_predict examples") {
  const KernelSpec k;
  RegressionSample s;
  s.points = {Point(0.5), Point(0.5), Point(0.5)};
  s.responses = {1, 2, 3};
  CHECK(nw_predict(s, k, 0.3, Point(0.5)) == doctest::Approx(2.0));
  CHECK(nw_predict(s, k, 0.3, Point(5.0)) == 0.0);

  RegressionSample one;
  one.points = {Point(1.25)};
  one.responses = {5};
  CHECK(nw_predict(one, k, 0.1, Point(1.25)) == 5.0);

  s.mask = {1, 0, 0};
  CHECK(nw_predict(s, k, 0.3, Point(0.5)) == doctest::Approx(1.0));
  s.mask = {1};
  CHECK_THROWS_AS(nw_predict(s, k, 0.3, Point(0.5)), InvalidInput);
}

TEST_CASE("stabilization swaps in the box average") {
  // Two points right at the edge of the support carry tiny Epanechnikov
  // mass; the floor replaces the weighted mean by the plain box mean.
  RegressionSample s;
  const double h = 1.0;
  s.points = {Point(1.0 - 1e-6), Point(-(1.0 - 1e-7))};
  s.responses = {10, 20};
  KernelSpec k;
  CHECK(nw_predict(s, k, h, Point(0.0)) == doctest::Approx(15.0));
  k.stabilization_floor = 1e-9;
  CHECK(nw_predict(s, k, h, Point(0.0)) != doctest::Approx(15.0));
}

TEST_CASE("brute-force equivalence on random instances") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_int_distribution<int> size(1, 20), dim(1, 3), fam(0, 2);
  const KernelFamily fams[] = {KernelFamily::epanechnikov, KernelFamily::uniform, KernelFamily::gaussian};
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = size(rng), d = dim(rng);
    const KernelFamily f = fams[fam(rng)];
    std::vector<Point> pts(n);
    std::vector<double> r(n);
    for (int j = 0; j < n; ++j) {
      pts[j].dim = d;
      for (int k = 0; k < d; ++k) pts[j][k] = u(rng);
      r[j] = 5 * u(rng);
    }
    Point x;
    x.dim = d;
    for (int k = 0; k < d; ++k) x[k] = u(rng);
    const double h = 0.2 + std::abs(u(rng));
    RegressionSample s{pts, r, {}};
    const KernelSpec k{f};
    const double want = brute_force(pts, r, f, h, x);
    worst = std::max(worst, std::abs(nw_predict(s, k, h, x) - want));
    NwRegressor reg(pts, r, 1, k, Bandwidth(h, d));
    worst = std::max(worst, std::abs(reg.predict(x) - want));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("convexity, response affinity and translation invariance") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 2);
  const KernelSpec k;
  for (int trial = 0; trial < 200; ++trial) {
    RegressionSample s;
    for (int j = 0; j < 15; ++j) {
      s.points.push_back(Point(u(rng)));
      s.responses.push_back(u(rng) * 3 - 1);
    }
    const Point x(u(rng));
    const double h = 0.5;
    const double base = nw_predict(s, k, h, x);
    double mn = 1e9, mx = -1e9, mass = 0;
    for (std::size_t j = 0; j < s.points.size(); ++j) {
      mass += kernel_profile(k.family, (x[0] - s.points[j][0]) / h);
      if (std::abs(x[0] - s.points[j][0]) <= h) {
        mn = std::min(mn, s.responses[j]);
        mx = std::max(mx, s.responses[j]);
      }
    }
    if (mass > 0) {
      CHECK(base >= mn - 1e-12);
      CHECK(base <= mx + 1e-12);
      RegressionSample a = s;
      for (auto& r : a.responses) r = 2.5 * r - 4;
      CHECK(nw_predict(a, k, h, x) == doctest::Approx(2.5 * base - 4));
    }
    RegressionSample t = s;
    for (auto& p : t.points) p[0] += 0.375;
    CHECK(nw_predict(t, k, h, Point(x[0] + 0.375)) == doctest::Approx(base));
  }
}

TEST_CASE("multi-column regressor matches single-column predictions") {
  std::vector<Point> pts;
  std::vector<double> two, a, b;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 2);
  for (int j = 0; j < 50; ++j) {
    pts.push_back(Point(u(rng)));
    a.push_back(u(rng));
    b.push_back(u(rng));
    two.push_back(a.back());
    two.push_back(b.back());
  }
  const KernelSpec k;
  NwRegressor both(pts, two, 2, k, Bandwidth(0.3, 1));
  NwRegressor ra(pts, a, 1, k, Bandwidth(0.3, 1)), rb(pts, b, 1, k, Bandwidth(0.3, 1));
  for (double x : {0.0, 0.4, 1.1, 1.99, 3.0}) {
    CHECK(both.predict(Point(x), 0) == ra.predict(Point(x)));
    CHECK(both.predict(Point(x), 1) == rb.predict(Point(x)));
  }
}
