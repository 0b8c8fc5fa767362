// trialkit: trial-design analysis toolkit.
//
// Subcommands cover success-rate bounds under heterogeneous effects, the
// integer-table enumeration oracle, randomized-versus-opposites sample-size
// arithmetic, temporal-discontinuity simulation diagnostics, noisy
// discontinuity-design Monte Carlo, and the conditional no-confounding check.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "trialkit/cli.hpp"
#include "trialkit/config.hpp"

namespace {

using trialkit::cli::OutputFormat;
using trialkit::cli::RunConfig;
using json = nlohmann::json;

struct CommonFlags {
  std::string format = "table";
  std::string output_path;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_seed) {
  cmd->add_option("--format", flags.format, "Output format: table, csv, json")
      ->check(CLI::IsMember({"table", "csv", "json"}));
  cmd->add_option("--out", flags.output_path,
                  "Output file (relative paths honor TRIALKIT_OUT_DIR)");
  if (with_seed) {
    cmd->add_option("--seed", flags.seed, "Random seed (default 0)");
  }
}

RunConfig make_config(const std::string& command, const CommonFlags& flags, json params) {
  RunConfig config;
  config.command = command;
  config.params = std::move(params);
  config.seed = flags.seed;
  config.output_path = flags.output_path;
  config.format = trialkit::cli::parse_format(flags.format);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trialkit: trial-design analysis toolkit"};
  app.require_subcommand(1);

  // bounds
  CommonFlags bounds_flags;
  double bounds_rj = 0.0, bounds_rk = 0.0, bounds_alpha = 0.0;
  auto* bounds = app.add_subcommand("bounds", "Closed-form success-rate bounds");
  bounds->add_option("--rj", bounds_rj, "Observed success rate of arm j")->required();
  bounds->add_option("--rk", bounds_rk, "Observed success rate of arm k")->required();
  auto* bounds_alpha_opt =
      bounds->add_option("--alpha", bounds_alpha, "Affected proportion (optional)");
  add_common(bounds, bounds_flags, false);

  // oracle
  CommonFlags oracle_flags;
  std::int64_t oracle_n = 0;
  double oracle_rj = 0.0, oracle_rk = 0.0, oracle_alpha = 0.0;
  auto* oracle = app.add_subcommand("oracle", "Enumeration oracle over integer response tables");
  oracle->add_option("--n", oracle_n, "Sample size (rates must sit on the 1/n grid)")->required();
  oracle->add_option("--rj", oracle_rj, "Observed success rate of arm j")->required();
  oracle->add_option("--rk", oracle_rk, "Observed success rate of arm k")->required();
  auto* oracle_alpha_opt =
      oracle->add_option("--alpha", oracle_alpha, "Affected proportion (optional)");
  add_common(oracle, oracle_flags, false);

  // transport
  CommonFlags transport_flags;
  std::int64_t transport_n = 0, transport_nstar = 0;
  double transport_p = 0.0, transport_q = 0.0;
  auto* transport =
      app.add_subcommand("transport", "Randomized-versus-opposites sample-size arithmetic");
  transport->add_option("--n", transport_n, "Randomized-trial sample size")->required();
  transport->add_option("--p", transport_p, "Randomization probability for arm k")->required();
  auto* transport_q_opt =
      transport->add_option("--q", transport_q, "Fraction preferring arm k (enables cell tables)");
  auto* transport_nstar_opt =
      transport->add_option("--nstar", transport_nstar, "Opposites-design sample size");
  add_common(transport, transport_flags, false);

  // td-sim
  CommonFlags td_flags;
  std::string td_config;
  std::int64_t td_draws = 100'000;
  auto* td_sim = app.add_subcommand("td-sim", "Temporal-discontinuity subsample diagnostics");
  td_sim->add_option("--config", td_config, "Cohort spec file")->required();
  td_sim->add_option("--draws", td_draws, "Monte Carlo draws (default 100000)");
  add_common(td_sim, td_flags, true);

  // k-sweep
  CommonFlags sweep_flags;
  std::string sweep_config;
  std::vector<double> sweep_sigmas;
  std::int64_t sweep_draws = 100'000;
  auto* sweep = app.add_subcommand("k-sweep", "Distance-to-uniform across a dispersion ladder");
  sweep->add_option("--config", sweep_config, "Cohort spec file")->required();
  sweep->add_option("--sigmas", sweep_sigmas, "Comma-separated dispersion values")
      ->required()
      ->delimiter(',');
  sweep->add_option("--draws", sweep_draws, "Monte Carlo draws per sigma (default 100000)");
  add_common(sweep, sweep_flags, true);

  // rdd-sim
  CommonFlags rdd_flags;
  std::string rdd_config, rdd_density;
  std::int64_t rdd_n_pop = 1'000'000;
  auto* rdd_sim = app.add_subcommand("rdd-sim", "Noisy discontinuity-design Monte Carlo");
  rdd_sim->add_option("--config", rdd_config, "Scenario spec file")->required();
  rdd_sim->add_option("--n-pop", rdd_n_pop, "Simulated population size (default 1000000)");
  auto* rdd_density_opt = rdd_sim->add_option(
      "--emit-density", rdd_density, "Write the conditional latent density grid to this CSV file");
  add_common(rdd_sim, rdd_flags, true);

  // confounding
  CommonFlags conf_flags;
  std::string conf_config;
  double conf_tolerance = 1e-9;
  auto* confounding =
      app.add_subcommand("confounding", "Marginal and conditional no-confounding check");
  confounding->add_option("--config", conf_config, "Potential-outcomes spec file")->required();
  confounding->add_option("--tolerance", conf_tolerance,
                          "Expectation equality tolerance (default 1e-9)");
  add_common(confounding, conf_flags, false);

  // run
  std::string run_path;
  auto* run_cmd = app.add_subcommand("run", "Execute a self-describing run config");
  run_cmd->add_option("config", run_path, "Run config JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  RunConfig config;
  try {
    if (bounds->parsed()) {
      json params{{"rj", bounds_rj}, {"rk", bounds_rk}};
      if (bounds_alpha_opt->count() > 0) params["alpha"] = bounds_alpha;
      config = make_config("bounds", bounds_flags, std::move(params));
    } else if (oracle->parsed()) {
      json params{{"n", oracle_n}, {"rj", oracle_rj}, {"rk", oracle_rk}};
      if (oracle_alpha_opt->count() > 0) params["alpha"] = oracle_alpha;
      config = make_config("oracle", oracle_flags, std::move(params));
    } else if (transport->parsed()) {
      json params{{"n", transport_n}, {"p", transport_p}};
      if (transport_q_opt->count() > 0) params["q"] = transport_q;
      if (transport_nstar_opt->count() > 0) params["nstar"] = transport_nstar;
      config = make_config("transport", transport_flags, std::move(params));
    } else if (td_sim->parsed()) {
      json params{{"cohort", td_config}, {"draws", td_draws}};
      config = make_config("td-sim", td_flags, std::move(params));
    } else if (sweep->parsed()) {
      json params{{"cohort", sweep_config}, {"sigmas", sweep_sigmas}, {"draws", sweep_draws}};
      config = make_config("k-sweep", sweep_flags, std::move(params));
    } else if (rdd_sim->parsed()) {
      json params{{"scenario", rdd_config}, {"n_pop", rdd_n_pop}};
      if (rdd_density_opt->count() > 0) params["emit_density"] = rdd_density;
      config = make_config("rdd-sim", rdd_flags, std::move(params));
    } else if (confounding->parsed()) {
      json params{{"cohort", conf_config}, {"tolerance", conf_tolerance}};
      config = make_config("confounding", conf_flags, std::move(params));
    } else if (run_cmd->parsed()) {
      config = trialkit::cli::run_config_from_json(trialkit::config::load_json_file(run_path));
    }
  } catch (const trialkit::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_status();
  }

  return trialkit::cli::run(config, std::cout, std::cerr);
}
