// Command-line front end: oracle quantities, variance suites and
// sequential-testing suites.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "sloaci/harness.hpp"

using namespace sloaci;

namespace {

struct Flags {
  std::string config_file;
  ConfigMap map;  // values given on the command line

  void put(const std::string& key, const std::string& value, const std::string& flag) {
    map.set(key, value, "flag " + flag);
  }
};

/// Registers an option that writes to `key` only when given.
template <typename T>
void bind(CLI::App* app, Flags& flags, const std::string& name, const std::string& key, const std::string& help) {
  app->add_option_function<T>(
      name,
      [&flags, name, key](const T& v) {
        if constexpr (std::is_same_v<T, std::string>)
          flags.put(key, v, name);
        else
          flags.put(key, std::to_string(v), name);
      },
      help);
}

void add_common(CLI::App* app, Flags& flags) {
  app->add_option("--config", flags.config_file, "key=value config file (flags take precedence)");
  bind<std::size_t>(app, flags, "--scenario", "scenario.id", "built-in scenario 1-4");
  bind<std::string>(app, flags, "--design", "design.variant", "sloaci, rar, rars, rct or opt");
  bind<std::size_t>(app, flags, "--reps", "run.reps", "number of replications");
  bind<std::size_t>(app, flags, "--horizon", "run.horizon", "stages per replication");
  bind<std::size_t>(app, flags, "--batch", "design.batch", "batch size (1 = fully adaptive)");
  bind<std::uint64_t>(app, flags, "--seed", "run.seed", "master seed");
  bind<std::string>(app, flags, "--out", "run.out", "output directory");
  bind<std::size_t>(app, flags, "--workers", "run.workers", "worker threads (0 = all cores)");
  bind<std::string>(app, flags, "--backend", "design.backend", "nonparametric, linear or profile");
  bind<std::string>(app, flags, "--init-scoring", "design.init_scoring", "ipw or refit");
  bind<std::size_t>(app, flags, "--checkpoint", "run.checkpoint", "checkpoint spacing");
  bind<std::size_t>(app, flags, "--trace-rep", "run.trace_rep", "replication traced into intervals.csv");
  app->add_flag_callback(
      "--trajectories", [&flags] { flags.put("run.trajectories", "true", "--trajectories"); },
      "write trajectories.csv");
  app->add_option_function<std::vector<std::string>>(
      "--set",
      [&flags](const std::vector<std::string>& kvs) {
        for (const auto& kv : kvs) {
          const auto eq = kv.find('=');
          if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value");
          flags.put(kv.substr(0, eq), kv.substr(eq + 1), "--set");
        }
      },
      "extra key=value settings");
}

RunConfig resolve(const Flags& flags) {
  ConfigMap merged;
  if (!flags.config_file.empty()) merged = ConfigMap::load(flags.config_file);
  merged.override_with(flags.map);
  if (!merged.has("scenario.id")) throw CLI::RequiredError("--scenario");
  return RunConfig::from_map(merged);
}

int run(const RunConfig& cfg) {
  SuiteContext ctx(cfg);
  const SuiteResult result = run_suite(cfg, ctx);
  std::string dir = cfg.out_dir;
  if (dir.empty()) {
    const char* env = std::getenv(kOutDirEnv);
    dir = env ? env : "sloaci_out";
  }
  write_outputs(cfg, ctx, result, dir);
  for (const auto& row : summarize_variance(cfg, ctx, result))
    if (row.T == cfg.horizon)
      std::cout << "T=" << row.T << " normalized_variance=" << format_number(row.normalized_variance)
                << " regret=" << format_number(row.regret) << "\n";
  std::cout << "wrote " << dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive experiment simulator with surrogate-assisted Neyman allocation"};
  app.require_subcommand(1);

  Flags oracle_flags, sim_flags, test_flags;

  auto* oracle = app.add_subcommand("oracle", "print oracle quantities for a scenario");
  std::size_t oracle_id = 0;
  oracle->add_option("scenario", oracle_id, "scenario id")->required();

  auto* simulate = app.add_subcommand("simulate", "run the variance/regret suite");
  add_common(simulate, sim_flags);

  auto* test = app.add_subcommand("test", "run the sequential-testing suite");
  add_common(test, test_flags);
  bind<std::string>(test, test_flags, "--tests", "test.kinds", "comma list of clt,bf,asy,eb");
  bind<std::string>(test, test_flags, "--tau-h0", "test.tau_h0", "null value(s), comma separated");
  bind<std::size_t>(test, test_flags, "--t0", "test.t0", "initial peeking stage");
  bind<double>(test, test_flags, "--alpha", "test.alpha", "level");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (oracle->parsed()) {
      const OracleQuantities q = oracle_quantities(built_in_scenario(static_cast<int>(oracle_id)));
      std::cout << "scenario=" << oracle_id << "\n"
                << "tau0=" << format_number(q.tau0) << "\n"
                << "gamma0=" << format_number(q.gamma0) << "\n"
                << "gamma1=" << format_number(q.gamma1) << "\n"
                << "sigma0=" << format_number(q.sigma0) << "\n"
                << "sigma1=" << format_number(q.sigma1) << "\n"
                << "pi_star=" << format_number(q.pi_star) << "\n"
                << "cate_dispersion=" << format_number(q.cate_dispersion) << "\n"
                << "bound_with_surrogates=" << format_number(q.bound_with_surrogates) << "\n"
                << "bound_without_surrogates=" << format_number(q.bound_without_surrogates) << "\n"
                << "gain=" << format_number(q.gain()) << "\n";
      return 0;
    }
    if (simulate->parsed()) return run(resolve(sim_flags));
    if (test->parsed()) {
      RunConfig cfg = resolve(test_flags);
      if (cfg.tests.empty()) throw CLI::RequiredError("--tests");
      return run(cfg);
    }
  } catch (const CLI::Error& e) {
    std::cerr << e.what() << "\n" << (simulate->parsed() ? simulate->help() : test->help());
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
