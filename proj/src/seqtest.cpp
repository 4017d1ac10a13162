#include "sloaci/seqtest.hpp"

#include <algorithm>
#include <cmath>

#include "sloaci/estimator.hpp"

namespace sloaci {

TestKind parse_test_kind(const std::string& name) {
  if (name == "clt") return TestKind::clt;
  if (name == "bf") return TestKind::bf;
  if (name == "asy") return TestKind::asy;
  if (name == "eb") return TestKind::eb;
  throw InvalidInput("unknown test '" + name + "' (expected clt, bf, asy or eb)");
}

std::string to_string(TestKind kind) {
  switch (kind) {
    case TestKind::clt: return "clt";
    case TestKind::bf: return "bf";
    case TestKind::asy: return "asy";
    case TestKind::eb: return "eb";
  }
  return "?";
}

void TestConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("test.alpha must lie in (0, 1)");
  if (t0 < 1 || t0 > horizon) throw InvalidInput("test.t0 must satisfy 1 <= t0 <= horizon");
  if (!(c > 0.0 && c < 1.0)) throw InvalidInput("test.eb_c must lie in (0, 1)");
  if (!(nu0_sq > 0.0)) throw InvalidInput("test.eb_nu0_sq must be positive");
  if (rho && !(*rho > 0.0)) throw InvalidInput("test.asy_rho must be positive");
  if (lo.has_value() != hi.has_value()) throw InvalidInput("test.eb_lo and test.eb_hi must be given together");
  if (lo && !(*lo < *hi)) throw InvalidInput("test.eb_lo must be below test.eb_hi");
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidInput("normal_quantile: p must lie in (0, 1)");
  // Acklam's rational approximation followed by one Halley step.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Refine against the upper or lower tail, whichever is small, to keep precision.
  const double e = p < 0.5 ? 0.5 * std::erfc(-x / std::sqrt(2.0)) - p : (1.0 - p) - 0.5 * std::erfc(x / std::sqrt(2.0));
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

namespace {

IntervalPoint symmetric(std::size_t t, double center, double half) {
  return {t, center - half, center + half};
}

}  // namespace

IntervalPoint clt_interval(double tau_hat, double varsigma_hat, std::size_t t, double alpha) {
  if (t == 0) throw InvalidInput("clt_interval: t must be positive");
  const double q = normal_quantile(1.0 - alpha / 2.0);
  return symmetric(t, tau_hat, varsigma_hat * q / std::sqrt(static_cast<double>(t)));
}

IntervalPoint bf_interval(double tau_hat, double varsigma_hat, std::size_t t, double alpha, std::size_t horizon) {
  if (t == 0) throw InvalidInput("bf_interval: t must be positive");
  if (t > horizon) throw InvalidInput("bf_interval: t exceeds the horizon");
  const double q = normal_quantile(1.0 - alpha / (2.0 * static_cast<double>(horizon)));
  return symmetric(t, tau_hat, varsigma_hat * q / std::sqrt(static_cast<double>(t)));
}

double asy_rho_opt(std::size_t t, double varsigma2_hat, double alpha) {
  const double tv = static_cast<double>(t) * varsigma2_hat;
  if (!(tv > 0.0)) throw InvalidInput("asy_rho_opt: t * varsigma2 must be positive");
  const double l = -2.0 * std::log(alpha);
  return std::sqrt((l + std::log(l + 1.0)) / tv);
}

IntervalPoint asy_interval(double tau_hat, double varsigma2_hat, std::size_t t, double rho, double alpha) {
  if (!(rho > 0.0)) throw InvalidInput("asy_interval: rho must be positive");
  if (t == 0) throw InvalidInput("asy_interval: t must be positive");
  const double td = static_cast<double>(t);
  const double a = td * varsigma2_hat * rho * rho + 1.0;
  return symmetric(t, tau_hat, std::sqrt(a / (td * td * rho * rho) * std::log(a / (alpha * alpha))));
}

double psi_e(double lambda) {
  if (!(lambda >= 0.0 && lambda < 1.0)) throw InvalidInput("psi_e: lambda must lie in [0, 1)");
  return -std::log1p(-lambda) - lambda;
}

IntervalPoint eb_update(EBState& s, double phi, double pi, double alpha, const TestConfig& cfg) {
  if (!(pi > 0.0 && pi < 1.0)) throw InvalidInput("eb_update: allocation must lie in (0, 1)");
  const std::size_t t = ++s.t;
  const double td = static_cast<double>(t);
  const double k = 1.0 / std::min(pi, 1.0 - pi) + 1.0;
  const double cap = 1.0 / (k + 1.0);
  const double xi = phi / (k + 1.0);

  const double nu2 = (cfg.nu0_sq + s.sum_dev_sq) / td;
  const double log_inv_alpha = -std::log(alpha);
  const double lambda = std::min(std::sqrt(2.0 * log_inv_alpha / (nu2 * td * std::log1p(td))), cfg.c);
  const double xi_hat_prev = t == 1 ? cfg.xi_hat0 : std::min(s.sum_xi / (td - 1.0), cap);

  s.sum_penalty += (xi - xi_hat_prev) * (xi - xi_hat_prev) * psi_e(lambda);
  s.sum_lambda_xi += lambda * xi;
  s.sum_lambda_weight += lambda * cap;
  s.sum_xi += xi;
  const double xi_bar = std::min(s.sum_xi / td, cap);
  s.sum_dev_sq += (xi - xi_bar) * (xi - xi_bar);
  s.last_lambda = lambda;

  if (!(s.sum_lambda_weight > 0.0)) return IntervalPoint{t};
  return symmetric(t, s.sum_lambda_xi / s.sum_lambda_weight, (log_inv_alpha + s.sum_penalty) / s.sum_lambda_weight);
}

StopResult stopping_time(const IntervalSeries& series, double tau_h0, std::size_t t0, std::size_t horizon) {
  for (const IntervalPoint& p : series) {
    if (p.t < t0 || p.t > horizon) continue;
    if (!p.contains(tau_h0)) return {p.t, false};
  }
  return {horizon, true};
}

ExitTracker::ExitTracker(std::vector<double> nulls, std::size_t t0)
    : nulls_(std::move(nulls)), exits_(nulls_.size(), 0), t0_(t0) {}

void ExitTracker::observe(const IntervalPoint& p) {
  if (p.t < t0_) return;
  for (std::size_t i = 0; i < nulls_.size(); ++i)
    if (exits_[i] == 0 && !p.contains(nulls_[i])) exits_[i] = p.t;
}

double Rescaling::map(double v) {
  const double u = (v - lo) / width();
  if (u < 0.0 || u > 1.0) {
    ++clamps;
    return std::clamp(u, 0.0, 1.0);
  }
  return u;
}

Rescaling calibrate_rescaling(std::span<const double> outcomes, double sd_multiple) {
  if (outcomes.empty()) throw InsufficientData("calibrate_rescaling: no calibration outcomes");
  const auto [mn, mx] = std::minmax_element(outcomes.begin(), outcomes.end());
  double mean = 0.0, m2 = 0.0;
  std::size_t n = 0;
  for (double v : outcomes) {
    ++n;
    const double d = v - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (v - mean);
  }
  const double sd = n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0;
  Rescaling r;
  r.lo = *mn - sd_multiple * sd;
  r.hi = *mx + sd_multiple * sd;
  if (!(r.hi > r.lo)) {
    r.lo -= 0.5;
    r.hi += 0.5;
  }
  return r;
}

SequentialMonitor::SequentialMonitor(TestConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (cfg_.rho) rho_ = cfg_.rho;
  if (cfg_.lo) rescaling_ = Rescaling{*cfg_.lo, *cfg_.hi, 0};
}

std::optional<IntervalPoint> SequentialMonitor::update(std::size_t t, double tau_hat, double varsigma2_hat) {
  if (cfg_.test == TestKind::eb) throw InvalidInput("SequentialMonitor::update: EB consumes stage records");
  if (t < cfg_.t0) return std::nullopt;
  const double sd = std::sqrt(varsigma2_hat);
  switch (cfg_.test) {
    case TestKind::clt: return clt_interval(tau_hat, sd, t, cfg_.alpha);
    case TestKind::bf: return bf_interval(tau_hat, sd, t, cfg_.alpha, cfg_.horizon);
    case TestKind::asy:
      if (!rho_) rho_ = varsigma2_hat > 0.0 ? asy_rho_opt(t, varsigma2_hat, cfg_.alpha) : cfg_.rho_fallback;
      return asy_interval(tau_hat, varsigma2_hat, t, *rho_, cfg_.alpha);
    case TestKind::eb: break;
  }
  return std::nullopt;
}

void SequentialMonitor::calibrate(std::span<const double> outcomes) {
  if (rescaling_) return;
  rescaling_ = calibrate_rescaling(outcomes, cfg_.calibration_sd_multiple);
}

IntervalPoint SequentialMonitor::observe(const StageRecord& r) {
  if (cfg_.test != TestKind::eb) throw InvalidInput("SequentialMonitor::observe: only EB consumes stage records");
  if (!rescaling_) throw InsufficientData("SequentialMonitor::observe: EB bounds not calibrated");
  Rescaling& sc = *rescaling_;
  const double y = sc.map(r.y);
  const double mu0 = sc.map(r.mu0_hat);
  const double mu1 = sc.map(r.mu1_hat);
  const double phi = single_stage_phi(r.z, y, r.pi, mu0, mu1);
  IntervalPoint p = eb_update(eb_, phi, r.pi, cfg_.alpha, cfg_);
  const double w = sc.width();
  p.lower *= w;
  p.upper *= w;
  p.t = r.t;
  return p;
}

}  // namespace sloaci
