#include "sloaci/harness.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "sloaci/estimator.hpp"

namespace sloaci {

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

void RunConfig::validate() const {
  design.validate();
  if (design.uses_initialization() && horizon < design.T0 + 1)
    throw InvalidInput("run.horizon must exceed design.t0");
  if (horizon < 1) throw InvalidInput("run.horizon must be positive");
  if (reps < 1) throw InvalidInput("run.reps must be at least 1");
  if (checkpoint_every < 1) throw InvalidInput("run.checkpoint must be positive");
  if (eb_calibration < 1 || eb_calibration > horizon) throw InvalidInput("test.eb_calibration must lie in [1, horizon]");
  for (const auto& t : tests) t.validate();
  scenario().validate();
}

ScenarioSpec RunConfig::scenario() const {
  ScenarioSpec s = built_in_scenario(scenario_id);
  if (rho0) s.rho0 = *rho0;
  if (rho1) s.rho1 = *rho1;
  if (sigma_y0) s.sigma_Y0 = *sigma_y0;
  if (sigma_y1) s.sigma_Y1 = *sigma_y1;
  s.sigma_S0 = sigma_s0.value_or(s.sigma_Y0);
  s.sigma_S1 = sigma_s1.value_or(s.sigma_Y1);
  return s;
}

std::vector<std::size_t> RunConfig::checkpoints() const {
  std::vector<std::size_t> out;
  for (std::size_t t = checkpoint_every; t <= horizon; t += checkpoint_every) out.push_back(t);
  if (out.empty() || out.back() != horizon) out.push_back(horizon);
  return out;
}

namespace {

std::optional<double> optional_double(const ConfigMap& m, const std::string& key) {
  auto v = m.get(key);
  if (!v || *v == "auto") return std::nullopt;
  return m.get_double(key, 0.0);
}

}  // namespace

RunConfig RunConfig::from_map(const ConfigMap& m) {
  m.check_known();
  RunConfig c;
  const auto id = m.get_u64("scenario.id", 1);
  c.scenario_id = static_cast<int>(id);
  c.rho0 = optional_double(m, "scenario.rho0");
  c.rho1 = optional_double(m, "scenario.rho1");
  c.sigma_y0 = optional_double(m, "scenario.sigma_y0");
  c.sigma_y1 = optional_double(m, "scenario.sigma_y1");
  c.sigma_s0 = optional_double(m, "scenario.sigma_s0");
  c.sigma_s1 = optional_double(m, "scenario.sigma_s1");

  DesignPolicy& d = c.design;
  d.variant = parse_variant(m.get_string("design.variant", "sloaci"));
  d.eta = m.get_double("design.eta", d.eta);
  d.T0 = m.get_count("design.t0", d.T0);
  d.batch = m.get_count("design.batch", 50);
  d.init_scoring = parse_init_scoring(m.get_string("design.init_scoring", to_string(d.init_scoring)));
  auto db = m.get("design.backend"), mb = m.get("model.backend");
  if (db && mb && *db != *mb)
    throw ConfigError("conflicting values for the model backend: '" + *db + "' (" +
                      m.entries().at("design.backend").source + ") vs '" + *mb + "' (" +
                      m.entries().at("model.backend").source + ")");
  d.backend = parse_backend(db.value_or(mb.value_or("nonparametric")));
  d.fit.assigned_surrogate_only = m.get_bool("model.assigned_surrogate_only", false);
  d.fit.beta = m.get_double("model.beta", d.fit.beta);
  d.fit.kernel.family = parse_kernel_family(m.get_string("kernel.family", "epanechnikov"));
  d.fit.kernel.stabilization_floor = m.get_double("kernel.floor", d.fit.kernel.stabilization_floor);
  d.fit.c_h = optional_double(m, "kernel.c_h");
  d.fit.c_h_sd_multiple = m.get_double("kernel.c_h_sd_multiple", d.fit.c_h_sd_multiple);

  c.horizon = m.get_count("run.horizon", c.horizon);
  c.reps = m.get_count("run.reps", c.reps);
  c.seed = m.get_u64("run.seed", c.seed);
  c.workers = m.get_count("run.workers", c.workers);
  c.checkpoint_every = m.get_count("run.checkpoint", c.checkpoint_every);
  c.out_dir = m.get_string("run.out", "");
  c.trajectories = m.get_bool("run.trajectories", false);
  c.trace_rep = m.get_count("run.trace_rep", 0);
  c.oracle_mc_draws = m.get_count("run.oracle_mc_draws", c.oracle_mc_draws);

  TestConfig base;
  base.horizon = c.horizon;
  base.alpha = m.get_double("test.alpha", base.alpha);
  base.t0 = m.get_count("test.t0", base.t0);
  base.rho = optional_double(m, "test.asy_rho");
  base.c = m.get_double("test.eb_c", base.c);
  base.nu0_sq = m.get_double("test.eb_nu0_sq", base.nu0_sq);
  base.xi_hat0 = m.get_double("test.eb_xi_hat0", base.xi_hat0);
  base.lo = optional_double(m, "test.eb_lo");
  base.hi = optional_double(m, "test.eb_hi");
  base.calibration_sd_multiple = m.get_double("test.eb_sd_multiple", base.calibration_sd_multiple);
  for (const auto& name : m.get_list("test.kinds")) {
    TestConfig t = base;
    t.test = parse_test_kind(name);
    c.tests.push_back(t);
  }
  for (const auto& v : m.get_list("test.tau_h0")) {
    try {
      c.tau_h0.push_back(std::stod(v));
    } catch (const std::exception&) {
      throw ConfigError("test.tau_h0 expects numbers, got '" + v + "'");
    }
  }
  c.eb_calibration = m.get_count("test.eb_calibration", d.T0 >= 1 ? d.T0 : 20);
  return c;
}

ConfigMap RunConfig::to_map() const {
  ConfigMap m;
  const std::string src = "resolved";
  auto put = [&](const std::string& k, const std::string& v) { m.set(k, v, src); };
  auto put_opt = [&](const std::string& k, const std::optional<double>& v) {
    if (v) put(k, format_number(*v));
  };
  put("scenario.id", std::to_string(scenario_id));
  put_opt("scenario.rho0", rho0);
  put_opt("scenario.rho1", rho1);
  put_opt("scenario.sigma_y0", sigma_y0);
  put_opt("scenario.sigma_y1", sigma_y1);
  put_opt("scenario.sigma_s0", sigma_s0);
  put_opt("scenario.sigma_s1", sigma_s1);
  put("design.variant", to_string(design.variant));
  put("design.eta", format_number(design.eta));
  put("design.t0", std::to_string(design.T0));
  put("design.batch", std::to_string(design.batch));
  put("design.backend", to_string(design.backend));
  put("design.init_scoring", to_string(design.init_scoring));
  put("model.assigned_surrogate_only", design.fit.assigned_surrogate_only ? "true" : "false");
  put("model.beta", format_number(design.fit.beta));
  put("kernel.family", to_string(design.fit.kernel.family));
  put("kernel.floor", format_number(design.fit.kernel.stabilization_floor));
  put("kernel.c_h", design.fit.c_h ? format_number(*design.fit.c_h) : "auto");
  put("kernel.c_h_sd_multiple", format_number(design.fit.c_h_sd_multiple));
  put("run.horizon", std::to_string(horizon));
  put("run.reps", std::to_string(reps));
  put("run.seed", std::to_string(seed));
  put("run.workers", std::to_string(workers));
  put("run.checkpoint", std::to_string(checkpoint_every));
  if (!out_dir.empty()) put("run.out", out_dir);
  put("run.trajectories", trajectories ? "true" : "false");
  put("run.trace_rep", std::to_string(trace_rep));
  put("run.oracle_mc_draws", std::to_string(oracle_mc_draws));
  if (!tests.empty()) {
    std::string kinds;
    for (const auto& t : tests) kinds += (kinds.empty() ? "" : ",") + to_string(t.test);
    put("test.kinds", kinds);
    const TestConfig& t = tests.front();
    put("test.alpha", format_number(t.alpha));
    put("test.t0", std::to_string(t.t0));
    put("test.asy_rho", t.rho ? format_number(*t.rho) : "auto");
    put("test.eb_c", format_number(t.c));
    put("test.eb_nu0_sq", format_number(t.nu0_sq));
    put("test.eb_xi_hat0", format_number(t.xi_hat0));
    put_opt("test.eb_lo", t.lo);
    put_opt("test.eb_hi", t.hi);
    put("test.eb_sd_multiple", format_number(t.calibration_sd_multiple));
  }
  if (!tau_h0.empty()) {
    std::string v;
    for (double x : tau_h0) v += (v.empty() ? "" : ",") + format_number(x);
    put("test.tau_h0", v);
  }
  put("test.eb_calibration", std::to_string(eb_calibration));
  return m;
}

SuiteContext::SuiteContext(const RunConfig& cfg) : spec(cfg.scenario()), oracle(oracle_quantities(spec, cfg.oracle_mc_draws)) {}

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ec == std::errc() ? ptr : buf);
}

// ---------------------------------------------------------------------------
// One replication
// ---------------------------------------------------------------------------

ReplicationResult run_replication(const RunConfig& cfg, const SuiteContext& ctx, std::size_t rep,
                                  bool keep_trajectory, bool trace_intervals) {
  ReplicationResult out;
  RepOutcome& o = out.outcome;
  o.rep = rep;
  o.checkpoints = cfg.checkpoints();

  Rng units = derive_stream(cfg.seed, rep, StreamPurpose::units);
  Rng assignment = derive_stream(cfg.seed, rep, StreamPurpose::assignment);
  DesignEngine engine(cfg.design, ctx.spec, ctx.oracle);

  std::vector<double> nulls{ctx.oracle.tau0};
  nulls.insert(nulls.end(), cfg.tau_h0.begin(), cfg.tau_h0.end());
  std::vector<SequentialMonitor> monitors;
  std::vector<ExitTracker> trackers;
  for (const auto& t : cfg.tests) {
    monitors.emplace_back(t);
    trackers.emplace_back(nulls, t.t0);
  }

  std::vector<double> phis;
  phis.reserve(cfg.horizon);
  RunningEstimate est;
  std::size_t next_checkpoint = 0;
  std::size_t t = 0;

  auto phi_of = [](const StageRecord& r) { return single_stage_phi(r.z, r.y, r.pi, r.mu0_hat, r.mu1_hat); };

  try {
    for (t = 1; t <= cfg.horizon; ++t) {
      const Unit unit = sample_unit(ctx.spec, units);
      const DesignEngine::Step step = engine.step(unit, assignment);
      const History& h = engine.history();

      if (step.init_rescored) {
        phis.clear();
        est = RunningEstimate{};
        for (const auto& r : h.records()) {
          phis.push_back(phi_of(r));
          est.add(phis.back());
        }
      } else {
        phis.push_back(phi_of(step.record));
        est.add(phis.back());
      }
      if (!std::isfinite(phis.back())) throw Error("non-finite pseudo-outcome");

      const double tau_hat = est.tau_hat();
      const double var_hat = est.varsigma2_hat();
      if (next_checkpoint < o.checkpoints.size() && o.checkpoints[next_checkpoint] == t) {
        o.tau_hats.push_back(tau_hat);
        o.varsigma2_hats.push_back(var_hat);
        ++next_checkpoint;
      }

      for (std::size_t i = 0; i < monitors.size(); ++i) {
        SequentialMonitor& mon = monitors[i];
        auto emit = [&](const IntervalPoint& p) {
          if (p.t < mon.config().t0) return;
          if (!std::isfinite(p.lower) || !std::isfinite(p.upper)) throw Error("non-finite interval");
          trackers[i].observe(p);
          if (trace_intervals) out.intervals.push_back({mon.config().test, p});
        };
        if (mon.config().test != TestKind::eb) {
          if (auto p = mon.update(t, tau_hat, var_hat)) emit(*p);
        } else if (t == cfg.eb_calibration) {
          std::vector<double> ys;
          for (const auto& r : h.records()) ys.push_back(r.y);
          mon.calibrate(ys);
          for (const auto& r : h.records()) emit(mon.observe(r));
        } else if (t > cfg.eb_calibration) {
          emit(mon.observe(h[t - 1]));
        }
      }
    }
  } catch (const ReplicationError&) {
    throw;
  } catch (const std::exception& e) {
    throw ReplicationError(rep, t, e.what());
  }

  for (std::size_t i = 0; i < monitors.size(); ++i) {
    o.tests.push_back({monitors[i].config().test, trackers[i].nulls(), trackers[i].exits()});
    o.eb_clamps += monitors[i].clamp_count();
  }

  if (keep_trajectory) {
    RunningEstimate replay;
    const History& h = engine.history();
    for (std::size_t i = 0; i < phis.size(); ++i) {
      replay.add(phis[i]);
      out.trajectory.push_back({i + 1, h[i].pi, h[i].z, phis[i], replay.tau_hat(), replay.varsigma2_hat()});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Suite
// ---------------------------------------------------------------------------

SuiteResult run_suite(const RunConfig& cfg, const SuiteContext& ctx) {
  cfg.validate();
  SuiteResult result;
  result.reps.resize(cfg.reps);
  std::vector<std::exception_ptr> errors(cfg.reps);

  std::size_t workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, cfg.reps);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};

  auto work = [&] {
    for (;;) {
      const std::size_t rep = next.fetch_add(1);
      if (rep >= cfg.reps || failed.load()) return;
      try {
        result.reps[rep] = run_replication(cfg, ctx, rep, cfg.trajectories, rep == cfg.trace_rep);
      } catch (...) {
        errors[rep] = std::current_exception();
        failed.store(true);
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return result;
}

std::vector<VarianceRow> summarize_variance(const RunConfig& cfg, const SuiteContext& ctx, const SuiteResult& r) {
  std::vector<VarianceRow> rows;
  if (r.reps.size() < 2) return rows;
  const auto cps = cfg.checkpoints();
  std::vector<double> taus(r.reps.size());
  for (std::size_t k = 0; k < cps.size(); ++k) {
    for (std::size_t i = 0; i < r.reps.size(); ++i) taus[i] = r.reps[i].outcome.tau_hats[k];
    const double nv = normalized_variance(taus, cps[k]);
    rows.push_back({cps[k], nv, empirical_regret(nv, ctx.oracle.bound_with_surrogates, cps[k])});
  }
  return rows;
}

std::vector<TestingRow> summarize_testing(const RunConfig& cfg, const SuiteContext& ctx, const SuiteResult& r) {
  std::vector<TestingRow> rows;
  const auto cps = cfg.checkpoints();
  std::vector<double> nulls{ctx.oracle.tau0};
  nulls.insert(nulls.end(), cfg.tau_h0.begin(), cfg.tau_h0.end());
  std::vector<std::size_t> null_exits(r.reps.size()), exits(r.reps.size());
  for (std::size_t ti = 0; ti < cfg.tests.size(); ++ti) {
    for (std::size_t i = 0; i < r.reps.size(); ++i) null_exits[i] = r.reps[i].outcome.tests[ti].exits[0];
    // The true value is always reported; extra nulls follow in configured order.
    for (std::size_t ni = 0; ni < nulls.size(); ++ni) {
      if (ni > 0 && nulls[ni] == nulls[0]) continue;
      for (std::size_t i = 0; i < r.reps.size(); ++i) exits[i] = r.reps[i].outcome.tests[ti].exits[ni];
      for (std::size_t T : cps) {
        if (T < cfg.tests[ti].t0) continue;
        rows.push_back({cfg.tests[ti].test, nulls[ni], T, miscoverage(null_exits, T), power_and_stopping(exits, T)});
      }
    }
  }
  return rows;
}

namespace {

class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}
  ~OutputSet() {
    if (!committed_)
      for (const auto& p : written_) std::filesystem::remove(p);
  }
  std::ofstream open(const std::string& name) {
    const auto p = dir_ / name;
    written_.push_back(p);
    std::ofstream f(p);
    if (!f) throw Error("cannot write " + p.string());
    return f;
  }
  static void check(const std::ofstream& f, const std::string& name) {
    if (!f) throw Error("write failed: " + name);
  }
  void commit() { committed_ = true; }

 private:
  std::filesystem::path dir_;
  std::vector<std::filesystem::path> written_;
  bool committed_ = false;
};

}  // namespace

void write_outputs(const RunConfig& cfg, const SuiteContext& ctx, const SuiteResult& result,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  OutputSet files(dir);
  const std::string scen = std::to_string(cfg.scenario_id);
  const std::string design = to_string(cfg.design.variant);
  const auto fmt = format_number;

  {
    auto f = files.open("variance.csv");
    f << "scenario,design,T,reps,normalized_variance,regret_estimate\n";
    for (const auto& row : summarize_variance(cfg, ctx, result))
      f << scen << ',' << design << ',' << row.T << ',' << cfg.reps << ',' << fmt(row.normalized_variance) << ','
        << fmt(row.regret) << '\n';
    OutputSet::check(f, "variance.csv");
  }
  if (!cfg.tests.empty()) {
    auto f = files.open("testing.csv");
    f << "scenario,design,test,tau_h0,T,miscoverage,power,mean_stop,se_stop,censored_frac\n";
    for (const auto& row : summarize_testing(cfg, ctx, result))
      f << scen << ',' << design << ',' << to_string(row.test) << ',' << fmt(row.tau_h0) << ',' << row.T << ','
        << fmt(row.miscoverage) << ',' << fmt(row.stopping.power) << ',' << fmt(row.stopping.mean_stop) << ','
        << fmt(row.stopping.se_stop) << ',' << fmt(row.stopping.censored_frac) << '\n';
    OutputSet::check(f, "testing.csv");

    auto g = files.open("intervals.csv");
    g << "scenario,design,test,tau_h0,t,lower,upper,stopped,censored\n";
    if (cfg.trace_rep < result.reps.size()) {
      std::vector<double> nulls{ctx.oracle.tau0};
      nulls.insert(nulls.end(), cfg.tau_h0.begin(), cfg.tau_h0.end());
      const auto& rr = result.reps[cfg.trace_rep];
      for (const auto& iv : rr.intervals) {
        const TestDigest* dig = nullptr;
        for (const auto& d : rr.outcome.tests)
          if (d.test == iv.test) dig = &d;
        for (std::size_t ni = 0; ni < nulls.size(); ++ni) {
          if (ni > 0 && nulls[ni] == nulls[0]) continue;
          const std::size_t exit = dig ? dig->exits[ni] : 0;
          const bool stopped = exit != 0 && iv.point.t >= exit;
          const bool censored = exit == 0 && iv.point.t == cfg.horizon;
          g << scen << ',' << design << ',' << to_string(iv.test) << ',' << fmt(nulls[ni]) << ',' << iv.point.t
            << ',' << fmt(iv.point.lower) << ',' << fmt(iv.point.upper) << ',' << (stopped ? 1 : 0) << ','
            << (censored ? 1 : 0) << '\n';
        }
      }
    }
    OutputSet::check(g, "intervals.csv");
  }
  if (cfg.trajectories) {
    auto f = files.open("trajectories.csv");
    f << "scenario,design,rep,t,pi,z,phi,tau_hat,varsigma2_hat\n";
    for (const auto& rr : result.reps)
      for (const auto& row : rr.trajectory)
        f << scen << ',' << design << ',' << rr.outcome.rep << ',' << row.t << ',' << fmt(row.pi) << ','
          << index(row.z) << ',' << fmt(row.phi) << ',' << fmt(row.tau_hat) << ',' << fmt(row.varsigma2_hat) << '\n';
    OutputSet::check(f, "trajectories.csv");
  }
  {
    auto f = files.open("metadata.txt");
    std::size_t clamps = 0;
    for (const auto& rr : result.reps) clamps += rr.outcome.eb_clamps;
    f << "# sloaci " << SLOACI_VERSION << "\n";
    f << "# streams: mt19937_64 per (run.seed, rep, purpose) via splitmix64; purposes units=1 assignment=2\n";
    f << "# bandwidth constant: " << (cfg.design.fit.c_h ? "fixed" : "recomputed from the sample SD of X at every refit")
      << "\n";
    f << "# init phase: alternating arms, pseudo-outcome weight 1/2, scoring=" << to_string(cfg.design.init_scoring)
      << "\n";
    f << "# oracle: tau0=" << fmt(ctx.oracle.tau0) << " pi_star=" << fmt(ctx.oracle.pi_star)
      << " bound_with_surrogates=" << fmt(ctx.oracle.bound_with_surrogates)
      << " bound_without_surrogates=" << fmt(ctx.oracle.bound_without_surrogates) << "\n";
    if (ctx.oracle.monte_carlo)
      f << "# oracle monte carlo: seed=" << ctx.oracle.mc_seed << " draws=" << ctx.oracle.mc_draws << "\n";
    if (!cfg.tests.empty()) f << "# eb clamped values (all reps): " << clamps << "\n";
    const ConfigMap echo = cfg.to_map();
    for (const auto& [k, e] : echo.entries()) f << k << '=' << e.value << '\n';
    OutputSet::check(f, "metadata.txt");
  }
  files.commit();
}

}  // namespace sloaci
