#include "sloaci/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace sloaci {

double normalized_variance(std::span<const double> tau_hats, std::size_t T) {
  if (tau_hats.size() < 2) throw InvalidInput("normalized_variance: need at least two replications");
  double mean = 0.0, m2 = 0.0;
  std::size_t n = 0;
  for (double v : tau_hats) {
    ++n;
    const double d = v - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (v - mean);
  }
  return static_cast<double>(T) * m2 / static_cast<double>(n - 1);
}

double empirical_regret(double normalized_var, double v_star, std::size_t T) {
  return static_cast<double>(T) * (normalized_var - v_star);
}

double miscoverage(std::span<const std::size_t> exits, std::size_t T) {
  if (exits.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t e : exits)
    if (e != 0 && e <= T) ++hit;
  return static_cast<double>(hit) / static_cast<double>(exits.size());
}

StoppingSummary power_and_stopping(std::span<const std::size_t> exits, std::size_t T) {
  StoppingSummary s;
  if (exits.empty()) return s;
  const double n = static_cast<double>(exits.size());
  double sum = 0.0, sum_sq = 0.0;
  std::size_t stopped = 0;
  for (std::size_t e : exits) {
    const bool hit = e != 0 && e <= T;
    const double stage = static_cast<double>(hit ? e : T);
    stopped += hit;
    sum += stage;
    sum_sq += stage * stage;
  }
  s.power = static_cast<double>(stopped) / n;
  s.censored_frac = 1.0 - s.power;
  s.mean_stop = sum / n;
  if (exits.size() > 1) {
    const double var = std::max(0.0, (sum_sq - n * s.mean_stop * s.mean_stop) / (n - 1.0));
    s.se_stop = std::sqrt(var / n);
  }
  return s;
}

}  // namespace sloaci
