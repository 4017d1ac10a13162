#include "sloaci/plm.hpp"

#include <cmath>
#include <limits>

namespace sloaci {

// ---------------------------------------------------------------------------
// History
// ---------------------------------------------------------------------------

void History::append(const StageRecord& record) {
  if (record.t != records_.size() + 1)
    throw InvalidInput("History: stage " + std::to_string(record.t) + " appended after " +
                       std::to_string(records_.size()));
  if (!(record.pi > 0.0 && record.pi < 1.0)) throw InvalidInput("History: allocation must lie in (0, 1)");
  records_.push_back(record);
  ++counts_[index(record.z)];
}

History History::prefix(std::size_t t) const {
  if (t > records_.size()) throw InvalidInput("History::prefix: t exceeds history length");
  History h;
  for (std::size_t i = 0; i < t; ++i) h.append(records_[i]);
  return h;
}

Backend parse_backend(const std::string& name) {
  if (name == "nonparametric") return Backend::nonparametric;
  if (name == "linear") return Backend::linear;
  if (name == "profile") return Backend::profile;
  if (name == "outcome_only") return Backend::outcome_only;
  if (name == "augmented") return Backend::augmented;
  throw InvalidInput("unknown model backend '" + name + "'");
}

std::string to_string(Backend backend) {
  switch (backend) {
    case Backend::nonparametric: return "nonparametric";
    case Backend::linear: return "linear";
    case Backend::profile: return "profile";
    case Backend::outcome_only: return "outcome_only";
    case Backend::augmented: return "augmented";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

namespace {

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0, m2 = 0.0;
  std::size_t n = 0;
  for (double x : v) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  return std::sqrt(m2 / static_cast<double>(n - 1));
}

/// c_h for one coordinate: fixed, or a multiple of the sample SD. A constant
/// coordinate falls back to unit scale.
double coordinate_constant(const std::vector<double>& values, const FitSettings& settings) {
  if (settings.c_h) return *settings.c_h;
  const double sd = sample_sd(values);
  return settings.c_h_sd_multiple * (sd > 0.0 ? sd : 1.0);
}

void require_arm_data(const History& history, Arm z, std::size_t minimum) {
  if (history.count(z) < minimum || history.size() < 2)
    throw InsufficientData("fit: arm " + std::to_string(index(z)) + " has " + std::to_string(history.count(z)) +
                           " observations, need " + std::to_string(minimum));
}

Bandwidth scaled(const Bandwidth& constants, std::size_t n, double beta) {
  Bandwidth h = constants;
  for (std::size_t k = 0; k < h.dim; ++k) h.h[k] = bandwidth(constants.h[k], n, beta, constants.dim);
  return h;
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw Error(std::string("fit: non-finite ") + what);
}

}  // namespace

Bandwidth bandwidth_constants(const History& history, const FitSettings& settings) {
  const std::size_t d = history.empty() ? 1 : history[0].x.dim;
  Bandwidth c(1.0, d);
  std::vector<double> coord(history.size());
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t i = 0; i < history.size(); ++i) coord[i] = history[i].x[k];
    c.h[k] = coordinate_constant(coord, settings);
  }
  return c;
}

double golden_section_minimize(const std::function<double(double)>& f, double lower, double upper,
                               double tolerance, std::vector<std::pair<double, double>>* trace) {
  if (!(lower < upper) || !(tolerance > 0.0)) throw InvalidInput("golden_section_minimize: bad interval");
  std::vector<std::pair<double, double>> local;
  auto& grid = trace ? *trace : local;
  auto eval = [&](double x) {
    const double v = f(x);
    grid.emplace_back(x, v);
    return v;
  };
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lower, b = upper;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = eval(c), fd = eval(d);
  while (b - a > tolerance) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = eval(d);
    }
  }
  std::pair<double, double> best{0.0, std::numeric_limits<double>::infinity()};
  for (const auto& p : grid)
    if (p.second < best.second) best = p;
  if (!std::isfinite(best.second)) throw OptimizationError("golden_section_minimize: criterion not finite", grid);
  if (best.first - lower <= 2.0 * tolerance || upper - best.first <= 2.0 * tolerance)
    throw OptimizationError("golden_section_minimize: minimum not bracketed in [" + std::to_string(lower) + ", " +
                                std::to_string(upper) + "]",
                            grid);
  return best.first;
}

// ---------------------------------------------------------------------------
// Fits
// ---------------------------------------------------------------------------

struct FitBuilder {
  /// Regressor of S(0), S(1) on X over the stages that feed m_S.
  static std::shared_ptr<const NwRegressor> surrogate_regressor(const History& history, const FitSettings& settings,
                                                               const Bandwidth& constants,
                                                               std::optional<Arm> only_arm) {
    std::vector<Point> pts;
    std::vector<double> resp;
    pts.reserve(history.size());
    resp.reserve(2 * history.size());
    for (const auto& r : history.records()) {
      if (only_arm && r.z != *only_arm) continue;
      pts.push_back(r.x);
      resp.push_back(r.s0);
      resp.push_back(r.s1);
    }
    const Bandwidth h = scaled(constants, pts.size(), settings.beta);
    return std::make_shared<const NwRegressor>(pts, resp, 2, settings.kernel, h);
  }

  /// Regressor of (Y, S(z)) on X over arm-z stages.
  static std::shared_ptr<const NwRegressor> arm_regressor(const History& history, Arm z, const FitSettings& settings,
                                                         const Bandwidth& constants) {
    std::vector<Point> pts;
    std::vector<double> resp;
    for (const auto& r : history.records()) {
      if (r.z != z) continue;
      pts.push_back(r.x);
      resp.push_back(r.y);
      resp.push_back(r.s(z));
    }
    const Bandwidth h = scaled(constants, pts.size(), settings.beta);
    return std::make_shared<const NwRegressor>(pts, resp, 2, settings.kernel, h);
  }

  static double residual_sigma(const History& history, const ArmFit& fit) {
    double ss = 0.0;
    std::size_t n = 0;
    for (const auto& r : history.records()) {
      if (r.z != fit.arm_) continue;
      const double e = r.y - fit.predict_mu(r.x, r.s0, r.s1);
      ss += e * e;
      ++n;
    }
    const double sigma = std::sqrt(ss / static_cast<double>(n));
    check_finite(sigma, "sigma_hat");
    return sigma;
  }

  static ArmFit robinson(const History& history, Arm z, const FitSettings& settings,
                         std::shared_ptr<const NwRegressor> s_reg) {
    require_arm_data(history, z, 2);
    const Bandwidth constants = bandwidth_constants(history, settings);
    if (!s_reg)
      s_reg = surrogate_regressor(history, settings, constants,
                                  settings.assigned_surrogate_only ? std::optional<Arm>(z) : std::nullopt);

    ArmFit fit;
    fit.backend_ = Backend::nonparametric;
    fit.arm_ = z;
    fit.fit_stage_ = history.size();
    fit.m_Y_ = arm_regressor(history, z, settings, constants);
    fit.m_Y_column_ = 0;
    fit.m_S_ = std::move(s_reg);
    fit.m_S_column_ = index(z);

    double num = 0.0, den = 0.0;
    for (const auto& r : history.records()) {
      if (r.z != z) continue;
      const double ey = r.y - fit.m_Y_->predict(r.x, 0);
      const double es = r.s(z) - fit.m_S_->predict(r.x, fit.m_S_column_);
      num += ey * es;
      den += es * es;
    }
    fit.gamma_hat_ = den < kDegenerateSurrogateSs ? 0.0 : num / den;
    check_finite(fit.gamma_hat_, "gamma_hat");
    fit.sigma_hat_ = residual_sigma(history, fit);
    return fit;
  }

  static ArmFit linear(const History& history, Arm z, const FitSettings& settings) {
    const std::size_t d = history.empty() ? 1 : history[0].x.dim;
    require_arm_data(history, z, d + 1);

    auto solve = [&](const std::vector<const StageRecord*>& rows, auto response) {
      Eigen::MatrixXd X(rows.size(), d);
      Eigen::VectorXd r(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < d; ++k) X(i, k) = rows[i]->x[k];
        r(i) = response(*rows[i]);
      }
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
      if (qr.rank() < static_cast<Eigen::Index>(d))
        throw SingularDesign("fit_linear: design matrix has rank " + std::to_string(qr.rank()) + " < " +
                             std::to_string(d));
      return Eigen::VectorXd(qr.solve(r));
    };

    std::vector<const StageRecord*> all, arm;
    for (const auto& r : history.records()) {
      if (!settings.assigned_surrogate_only || r.z == z) all.push_back(&r);
      if (r.z == z) arm.push_back(&r);
    }

    ArmFit fit;
    fit.backend_ = Backend::linear;
    fit.arm_ = z;
    fit.fit_stage_ = history.size();
    fit.alpha_S_ = solve(all, [z](const StageRecord& r) { return r.s(z); });
    fit.alpha_Y_ = solve(arm, [](const StageRecord& r) { return r.y; });

    auto dot = [d](const Eigen::VectorXd& a, const Point& x) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += a(static_cast<Eigen::Index>(k)) * x[k];
      return s;
    };
    double num = 0.0, den = 0.0;
    for (const StageRecord* r : arm) {
      const double ey = r->y - dot(fit.alpha_Y_, r->x);
      const double es = r->s(z) - dot(fit.alpha_S_, r->x);
      num += ey * es;
      den += es * es;
    }
    fit.gamma_hat_ = den < kDegenerateSurrogateSs ? 0.0 : num / den;
    check_finite(fit.gamma_hat_, "gamma_hat");
    fit.sigma_hat_ = residual_sigma(history, fit);
    return fit;
  }

  static ArmFit profile(const History& history, Arm z, const FitSettings& settings) {
    require_arm_data(history, z, 2);
    const Bandwidth constants = bandwidth_constants(history, settings);

    ArmFit fit;
    fit.backend_ = Backend::profile;
    fit.arm_ = z;
    fit.fit_stage_ = history.size();
    fit.m_Y_ = arm_regressor(history, z, settings, constants);
    fit.m_Y_column_ = 0;
    fit.m_S_ = fit.m_Y_;
    fit.m_S_column_ = 1;

    // The weights of the gamma-specific smoother do not depend on the
    // response, so its fitted values are m_Y(X_j) - gamma * m_S(X_j) with both
    // smooths taken over arm z.
    struct Row {
      double y, s, y_hat, s_hat;
    };
    std::vector<Row> rows;
    double fitted[2];
    for (const auto& r : history.records()) {
      if (r.z != z) continue;
      fit.m_Y_->predict(r.x, std::span<double>(fitted, 2));
      rows.push_back({r.y, r.s(z), fitted[0], fitted[1]});
    }
    auto criterion = [&rows](double gamma) {
      double l = 0.0;
      for (const Row& row : rows) {
        const double e = (row.y - gamma * row.s) - (row.y_hat - gamma * row.s_hat);
        l += e * e;
      }
      return l;
    };
    fit.gamma_hat_ = golden_section_minimize(criterion, settings.profile_lower, settings.profile_upper,
                                             settings.profile_tolerance);
    fit.profile_criterion_ = criterion(fit.gamma_hat_);
    fit.sigma_hat_ = residual_sigma(history, fit);
    return fit;
  }

  static ArmFit outcome_only(const History& history, Arm z, const FitSettings& settings) {
    require_arm_data(history, z, 2);
    const Bandwidth constants = bandwidth_constants(history, settings);
    ArmFit fit;
    fit.backend_ = Backend::outcome_only;
    fit.arm_ = z;
    fit.fit_stage_ = history.size();
    fit.m_Y_ = arm_regressor(history, z, settings, constants);
    fit.m_Y_column_ = 0;
    fit.sigma_hat_ = residual_sigma(history, fit);
    return fit;
  }

  static ArmFit augmented(const History& history, Arm z, const FitSettings& settings) {
    require_arm_data(history, z, 2);
    const Bandwidth x_constants = bandwidth_constants(history, settings);
    std::vector<Point> pts;
    std::vector<double> resp, surrogate;
    for (const auto& r : history.records()) {
      if (r.z != z) continue;
      pts.push_back(r.x.extended(r.s(z)));
      resp.push_back(r.y);
      surrogate.push_back(r.s(z));
    }
    Bandwidth constants = x_constants;
    constants.dim = x_constants.dim + 1;
    constants.h[x_constants.dim] = coordinate_constant(surrogate, settings);
    const Bandwidth h = scaled(constants, pts.size(), settings.beta);

    ArmFit fit;
    fit.backend_ = Backend::augmented;
    fit.arm_ = z;
    fit.fit_stage_ = history.size();
    fit.m_Y_ = std::make_shared<const NwRegressor>(pts, resp, 1, settings.kernel, h);
    fit.m_Y_column_ = 0;
    fit.sigma_hat_ = residual_sigma(history, fit);
    return fit;
  }
};

double ArmFit::predict_mu(const Point& x, double s0, double s1) const {
  const double s = arm_ == Arm::treated ? s1 : s0;
  switch (backend_) {
    case Backend::nonparametric:
    case Backend::profile: {
      const double my = m_Y_->predict(x, m_Y_column_);
      const double ms = m_S_->predict(x, m_S_column_);
      return my - gamma_hat_ * ms + gamma_hat_ * s;
    }
    case Backend::linear: {
      double v = gamma_hat_ * s;
      for (Eigen::Index k = 0; k < alpha_Y_.size(); ++k)
        v += (alpha_Y_(k) - gamma_hat_ * alpha_S_(k)) * x[static_cast<std::size_t>(k)];
      return v;
    }
    case Backend::outcome_only:
      return m_Y_->predict(x, m_Y_column_);
    case Backend::augmented:
      return m_Y_->predict(x.extended(s), 0);
  }
  return 0.0;
}

ArmFit fit_nonparametric(const History& history, Arm z, const FitSettings& settings) {
  return FitBuilder::robinson(history, z, settings, nullptr);
}

ArmFit fit_linear(const History& history, Arm z, const FitSettings& settings) {
  return FitBuilder::linear(history, z, settings);
}

ArmFit fit_profile(const History& history, Arm z, const FitSettings& settings) {
  return FitBuilder::profile(history, z, settings);
}

ArmFit fit_outcome_only(const History& history, Arm z, const FitSettings& settings) {
  return FitBuilder::outcome_only(history, z, settings);
}

ArmFit fit_augmented(const History& history, Arm z, const FitSettings& settings) {
  return FitBuilder::augmented(history, z, settings);
}

std::array<ArmFit, 2> fit_arms(const History& history, Backend backend, const FitSettings& settings) {
  switch (backend) {
    case Backend::nonparametric: {
      if (settings.assigned_surrogate_only)
        return {fit_nonparametric(history, Arm::control, settings), fit_nonparametric(history, Arm::treated, settings)};
      require_arm_data(history, Arm::control, 2);
      require_arm_data(history, Arm::treated, 2);
      auto s_reg = FitBuilder::surrogate_regressor(history, settings, bandwidth_constants(history, settings),
                                                   std::nullopt);
      return {FitBuilder::robinson(history, Arm::control, settings, s_reg),
              FitBuilder::robinson(history, Arm::treated, settings, s_reg)};
    }
    case Backend::linear:
      return {fit_linear(history, Arm::control, settings), fit_linear(history, Arm::treated, settings)};
    case Backend::profile:
      return {fit_profile(history, Arm::control, settings), fit_profile(history, Arm::treated, settings)};
    case Backend::outcome_only:
      return {fit_outcome_only(history, Arm::control, settings), fit_outcome_only(history, Arm::treated, settings)};
    case Backend::augmented:
      return {fit_augmented(history, Arm::control, settings), fit_augmented(history, Arm::treated, settings)};
  }
  throw InvalidInput("fit_arms: unknown backend");
}

}  // namespace sloaci
