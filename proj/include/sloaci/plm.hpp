#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sloaci/kernel.hpp"
#include "sloaci/types.hpp"

namespace sloaci {

/// One completed stage of the experiment. `mu0_hat`/`mu1_hat` are the
/// outcome-model predictions that entered the stage's pseudo-outcome.
struct StageRecord {
  std::size_t t = 0;
  Point x;
  Arm z = Arm::control;
  double s0 = 0.0, s1 = 0.0;
  double y = 0.0;
  double pi = 0.5;
  double mu0_hat = 0.0, mu1_hat = 0.0;

  double s(Arm arm) const { return arm == Arm::treated ? s1 : s0; }
};

/// Append-only experiment log.
class History {
 public:
  History() = default;

  /// Requires record.t == size() + 1 and pi in (0, 1).
  void append(const StageRecord& record);

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  std::size_t count(Arm z) const { return counts_[index(z)]; }
  const std::vector<StageRecord>& records() const { return records_; }
  const StageRecord& operator[](std::size_t i) const { return records_[i]; }
  StageRecord& mutable_record(std::size_t i) { return records_[i]; }

  /// The first `t` stages.
  History prefix(std::size_t t) const;

 private:
  std::vector<StageRecord> records_;
  std::array<std::size_t, 2> counts_{0, 0};
};

/// Outcome-model backends. `nonparametric`, `linear` and `profile` fit the
/// partially linear model; `outcome_only` regresses Y on X alone and
/// `augmented` treats (X, S(z)) as a (d+1)-dimensional covariate.
enum class Backend { nonparametric, linear, profile, outcome_only, augmented };

Backend parse_backend(const std::string& name);
std::string to_string(Backend backend);

struct FitSettings {
  KernelSpec kernel;
  /// Fixed bandwidth constant; when unset it is `c_h_sd_multiple` times the
  /// sample SD of each covariate coordinate in the current history.
  std::optional<double> c_h;
  double c_h_sd_multiple = 2.0;
  double beta = 1.0;
  /// Fit m_S,z only on stages assigned to z (observed-surrogate variant).
  bool assigned_surrogate_only = false;
  double profile_lower = -10.0;
  double profile_upper = 10.0;
  double profile_tolerance = 1e-6;
};

/// Sums of squares below this make the surrogate-residual slope undefined;
/// gamma_hat is then set to 0.
inline constexpr double kDegenerateSurrogateSs = 1e-12;

class ArmFit {
 public:
  ArmFit() = default;

  Backend backend() const { return backend_; }
  Arm arm() const { return arm_; }
  double gamma_hat() const { return gamma_hat_; }
  double sigma_hat() const { return sigma_hat_; }
  std::size_t fit_stage() const { return fit_stage_; }
  const Eigen::VectorXd& alpha_Y() const { return alpha_Y_; }
  const Eigen::VectorXd& alpha_S() const { return alpha_S_; }

  /// mu_hat_z(x, s); total over the domain (empty neighbourhoods give 0 for
  /// each kernel component).
  double predict_mu(const Point& x, double s0, double s1) const;

  /// Profile criterion value at gamma_hat (profile backend only, else NaN).
  double profile_criterion() const { return profile_criterion_; }

 private:
  friend struct FitBuilder;

  Backend backend_ = Backend::nonparametric;
  Arm arm_ = Arm::control;
  double gamma_hat_ = 0.0;
  double sigma_hat_ = 0.0;
  std::size_t fit_stage_ = 0;
  double profile_criterion_ = 0.0;

  std::shared_ptr<const NwRegressor> m_Y_;
  std::size_t m_Y_column_ = 0;
  std::shared_ptr<const NwRegressor> m_S_;
  std::size_t m_S_column_ = 0;
  Eigen::VectorXd alpha_Y_, alpha_S_;
};

/// Robinson residual-on-residual fit of the partially linear model.
ArmFit fit_nonparametric(const History& history, Arm z, const FitSettings& settings);
/// Least-squares fit of the linear model (no implicit intercept).
ArmFit fit_linear(const History& history, Arm z, const FitSettings& settings);
/// Profile least squares via golden-section search over gamma.
ArmFit fit_profile(const History& history, Arm z, const FitSettings& settings);
/// Nadaraya-Watson of Y on X only; gamma_hat = 0.
ArmFit fit_outcome_only(const History& history, Arm z, const FitSettings& settings);
/// Nadaraya-Watson of Y on (X, S(z)); gamma_hat = 0.
ArmFit fit_augmented(const History& history, Arm z, const FitSettings& settings);

/// Fits both arms with the chosen backend, sharing regressors across arms
/// where the backend allows it.
std::array<ArmFit, 2> fit_arms(const History& history, Backend backend, const FitSettings& settings);

inline double predict_mu(const ArmFit& fit, const Point& x, double s0, double s1) {
  return fit.predict_mu(x, s0, s1);
}

/// Bandwidth constant per coordinate for the current history (see FitSettings).
Bandwidth bandwidth_constants(const History& history, const FitSettings& settings);

/// Golden-section minimizer on [lower, upper]. Returns the best evaluated
/// point; throws OptimizationError when the minimum sits on a boundary.
double golden_section_minimize(const std::function<double(double)>& f, double lower, double upper,
                               double tolerance, std::vector<std::pair<double, double>>* trace = nullptr);

}  // namespace sloaci
