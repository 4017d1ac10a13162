#pragma once

#include <array>
#include <optional>
#include <string>

#include "sloaci/dgp.hpp"
#include "sloaci/plm.hpp"
#include "sloaci/rng.hpp"

namespace sloaci {

enum class Variant { sloaci, rar, rars, rct, opt };

Variant parse_variant(const std::string& name);
std::string to_string(Variant variant);

/// How the pseudo-outcomes of the initialization stages are formed.
/// `ipw`: mu_hat = 0 and pi = 1/2, as the algorithm is written.
/// `refit`: once the first fit is available, the initialization stages are
/// re-scored with that fit (pi stays 1/2).
enum class InitScoring { ipw, refit };

InitScoring parse_init_scoring(const std::string& name);
std::string to_string(InitScoring scoring);

struct DesignPolicy {
  Variant variant = Variant::sloaci;
  double eta = 0.25;
  std::size_t T0 = 20;
  std::size_t batch = 1;
  Backend backend = Backend::nonparametric;
  FitSettings fit;
  InitScoring init_scoring = InitScoring::refit;

  void validate() const;
  /// Backend actually fitted: RAR regresses on X only, RARS on (X, S(z)).
  Backend effective_backend() const;
  bool uses_initialization() const { return variant != Variant::opt; }
};

/// 0.5 * t^(-eta).
double clipping_threshold(std::size_t t, double eta);

/// Projection of pi_tilde onto [zeta, 1 - zeta].
double clip(double pi_tilde, double zeta);

/// sigma1 / (sigma0 + sigma1); 0.5 when both are zero.
double propose_allocation(double sigma0_hat, double sigma1_hat);

struct AllocationState {
  std::size_t t = 0;  // completed stages
  double pi_current = 0.5;
  double sigma0_hat = 0.0, sigma1_hat = 0.0;
  std::optional<std::array<ArmFit, 2>> fits;
};

/// Allocation for one stage. During initialization the arm is forced and
/// `pi` is the weight 1/2 used by the pseudo-outcome.
struct Allocation {
  double pi = 0.5;
  bool forced = false;
  Arm forced_arm = Arm::control;
};

/// First stage of the batch containing stage t (t itself when batch == 1).
std::size_t batch_start(std::size_t t, std::size_t T0, std::size_t batch);

Allocation next_allocation(const DesignPolicy& policy, const AllocationState& state, std::size_t t,
                           const OracleQuantities* oracle = nullptr);

/// Always consumes exactly one uniform from `rng`, so the assignment stream
/// stays aligned across designs.
Arm assign_treatment(const Allocation& allocation, Rng& rng);

/// One replication's allocation engine: owns the history and the current fits.
class DesignEngine {
 public:
  struct Step {
    StageRecord record;
    bool initialization = false;
    bool refit = false;
    /// The initialization records were re-scored after this stage.
    bool init_rescored = false;
  };

  /// `spec` and `oracle` must outlive the engine; OPT needs both.
  DesignEngine(DesignPolicy policy, const ScenarioSpec& spec, const OracleQuantities& oracle);

  Step step(const Unit& unit, Rng& assignment_rng);

  const History& history() const { return history_; }
  const AllocationState& state() const { return state_; }
  const DesignPolicy& policy() const { return policy_; }

  /// (mu0_hat, mu1_hat) under the current fits; zeros before the first fit.
  std::array<double, 2> predict(const Point& x, double s0, double s1) const;

  bool refit_due(std::size_t t) const;

 private:
  void refit();

  DesignPolicy policy_;
  const ScenarioSpec* spec_;
  const OracleQuantities* oracle_;
  History history_;
  AllocationState state_;
};

}  // namespace sloaci
