#include "sloaci/design.hpp"

#include <algorithm>
#include <cmath>

namespace sloaci {

Variant parse_variant(const std::string& name) {
  if (name == "sloaci") return Variant::sloaci;
  if (name == "rar") return Variant::rar;
  if (name == "rars") return Variant::rars;
  if (name == "rct") return Variant::rct;
  if (name == "opt") return Variant::opt;
  throw InvalidInput("unknown design '" + name + "' (expected sloaci, rar, rars, rct or opt)");
}

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::sloaci: return "sloaci";
    case Variant::rar: return "rar";
    case Variant::rars: return "rars";
    case Variant::rct: return "rct";
    case Variant::opt: return "opt";
  }
  return "?";
}

InitScoring parse_init_scoring(const std::string& name) {
  if (name == "ipw") return InitScoring::ipw;
  if (name == "refit") return InitScoring::refit;
  throw InvalidInput("unknown init scoring '" + name + "' (expected ipw or refit)");
}

std::string to_string(InitScoring scoring) { return scoring == InitScoring::ipw ? "ipw" : "refit"; }

void DesignPolicy::validate() const {
  if (!(eta > 0.0)) throw InvalidInput("design.eta must be positive");
  if (batch < 1) throw InvalidInput("design.batch must be at least 1");
  if (uses_initialization() && T0 < 2) throw InvalidInput("design.t0 must be at least 2");
}

Backend DesignPolicy::effective_backend() const {
  switch (variant) {
    case Variant::rar: return Backend::outcome_only;
    case Variant::rars: return Backend::augmented;
    default: return backend;
  }
}

double clipping_threshold(std::size_t t, double eta) {
  if (t == 0) throw InvalidInput("clipping_threshold: t must be positive");
  return 0.5 * std::pow(static_cast<double>(t), -eta);
}

double clip(double pi_tilde, double zeta) { return std::max(zeta, std::min(pi_tilde, 1.0 - zeta)); }

double propose_allocation(double sigma0_hat, double sigma1_hat) {
  if (sigma0_hat < 0.0 || sigma1_hat < 0.0) throw InvalidInput("propose_allocation: negative SD");
  const double total = sigma0_hat + sigma1_hat;
  return total == 0.0 ? 0.5 : sigma1_hat / total;
}

std::size_t batch_start(std::size_t t, std::size_t T0, std::size_t batch) {
  if (t <= T0) return t;
  return T0 + ((t - T0 - 1) / batch) * batch + 1;
}

Allocation next_allocation(const DesignPolicy& policy, const AllocationState& state, std::size_t t,
                           const OracleQuantities* oracle) {
  Allocation a;
  switch (policy.variant) {
    case Variant::opt:
      if (!oracle) throw InvalidInput("next_allocation: OPT needs oracle quantities");
      a.pi = oracle->pi_star;
      return a;
    default:
      break;
  }
  if (t <= policy.T0) {
    a.forced = true;
    a.forced_arm = t % 2 == 1 ? Arm::control : Arm::treated;
    a.pi = 0.5;
    return a;
  }
  if (policy.variant == Variant::rct) {
    a.pi = 0.5;
    return a;
  }
  if (!state.fits) throw InsufficientData("next_allocation: no fitted models after initialization");
  const double zeta = clipping_threshold(batch_start(t, policy.T0, policy.batch), policy.eta);
  a.pi = clip(propose_allocation(state.sigma0_hat, state.sigma1_hat), zeta);
  return a;
}

Arm assign_treatment(const Allocation& allocation, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (allocation.forced) return allocation.forced_arm;
  return u < allocation.pi ? Arm::treated : Arm::control;
}

DesignEngine::DesignEngine(DesignPolicy policy, const ScenarioSpec& spec, const OracleQuantities& oracle)
    : policy_(std::move(policy)), spec_(&spec), oracle_(&oracle) {
  policy_.validate();
}

std::array<double, 2> DesignEngine::predict(const Point& x, double s0, double s1) const {
  if (policy_.variant == Variant::opt)
    return {true_mu(*spec_, Arm::control, x, s0, s1), true_mu(*spec_, Arm::treated, x, s0, s1)};
  if (!state_.fits) return {0.0, 0.0};
  return {(*state_.fits)[0].predict_mu(x, s0, s1), (*state_.fits)[1].predict_mu(x, s0, s1)};
}

bool DesignEngine::refit_due(std::size_t t) const {
  if (policy_.variant == Variant::opt) return false;
  return t == policy_.T0 || (t > policy_.T0 && (t - policy_.T0) % policy_.batch == 0);
}

void DesignEngine::refit() {
  state_.fits = fit_arms(history_, policy_.effective_backend(), policy_.fit);
  state_.sigma0_hat = (*state_.fits)[0].sigma_hat();
  state_.sigma1_hat = (*state_.fits)[1].sigma_hat();
}

DesignEngine::Step DesignEngine::step(const Unit& unit, Rng& assignment_rng) {
  const std::size_t t = history_.size() + 1;
  const Allocation alloc = next_allocation(policy_, state_, t, oracle_);
  const Arm z = assign_treatment(alloc, assignment_rng);

  Step out;
  out.initialization = alloc.forced;
  StageRecord& r = out.record;
  r.t = t;
  r.x = unit.x;
  r.z = z;
  r.s0 = unit.s0;
  r.s1 = unit.s1;
  r.y = unit.y(z);
  r.pi = alloc.pi;
  const auto mu = predict(unit.x, unit.s0, unit.s1);
  r.mu0_hat = mu[0];
  r.mu1_hat = mu[1];
  history_.append(r);
  state_.t = t;
  state_.pi_current = alloc.pi;

  if (refit_due(t)) {
    refit();
    out.refit = true;
    if (t == policy_.T0 && policy_.init_scoring == InitScoring::refit) {
      for (std::size_t i = 0; i < t; ++i) {
        StageRecord& init = history_.mutable_record(i);
        const auto m = predict(init.x, init.s0, init.s1);
        init.mu0_hat = m[0];
        init.mu1_hat = m[1];
      }
      out.record = history_[t - 1];
      out.init_rescored = true;
    }
  }
  return out;
}

}  // namespace sloaci
