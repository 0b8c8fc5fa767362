#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "trialkit/config.hpp"
#include "trialkit/core.hpp"
#include "trialkit/errors.hpp"
#include "trialkit/rdd.hpp"
#include "trialkit/report.hpp"
#include "trialkit/sensitivity.hpp"
#include "trialkit/tdesign.hpp"
#include "trialkit/transport.hpp"

namespace trialkit::cli {

using config::StrictObject;
using json = nlohmann::json;

enum class OutputFormat { table, csv, json_format };

inline OutputFormat parse_format(const std::string& name) {
  if (name == "table") return OutputFormat::table;
  if (name == "csv") return OutputFormat::csv;
  if (name == "json") return OutputFormat::json_format;
  throw Error(ErrorKind::bad_config, "unknown format '" + name + "' (expected table, csv, json)");
}

// One fully described invocation. Stochastic commands default to seed 0.
struct RunConfig {
  std::string command;
  json params = json::object();
  std::uint64_t seed = 0;
  std::string output_path;  // empty: write to the provided stream
  OutputFormat format = OutputFormat::table;
};

inline RunConfig run_config_from_json(const json& spec) {
  StrictObject object(spec, "run config");
  RunConfig config;
  config.command = object.text("command");
  if (const json* params = object.optional("params")) {
    if (!params->is_object()) {
      throw Error(ErrorKind::bad_config, "run config: 'params' must be an object");
    }
    config.params = *params;
  }
  const std::int64_t seed = object.integer_or("seed", 0);
  if (seed < 0) throw Error(ErrorKind::bad_config, "run config: 'seed' must be nonnegative");
  config.seed = static_cast<std::uint64_t>(seed);
  if (const auto path = object.text_optional("output_path")) config.output_path = *path;
  if (const auto format = object.text_optional("format")) config.format = parse_format(*format);
  object.done();
  return config;
}

namespace detail {

using report::Report;
using report::TableData;
using report::Value;

inline Proportion param_proportion(StrictObject& params, const std::string& key) {
  return config::proportion_field(params, key);
}

// Inline object or a path to a JSON file holding the spec.
inline json resolve_spec(const json& value, const std::string& key) {
  if (value.is_string()) return config::load_json_file(value.get<std::string>());
  if (value.is_object()) return value;
  throw Error(ErrorKind::bad_config, "'" + key + "' must be an object or a file path");
}

inline Report run_bounds(StrictObject& params) {
  const RatePair rates{param_proportion(params, "rj"), param_proportion(params, "rk")};
  std::optional<Proportion> alpha;
  if (params.has("alpha")) alpha = param_proportion(params, "alpha");
  params.done();

  const auto result = alpha ? sensitivity::bounds_with_alpha(rates, *alpha)
                            : sensitivity::bounds_unconstrained(rates);
  const auto domain = sensitivity::alpha_domain(rates);
  Report report;
  report.command = "bounds";
  report.scalars.emplace_back("r_j", rates.r_j.value());
  report.scalars.emplace_back("r_k", rates.r_k.value());
  if (alpha) report.scalars.emplace_back("alpha", alpha->value());
  report.scalars.emplace_back("U", result.upper.value());
  report.scalars.emplace_back("L", result.lower.value());
  report.scalars.emplace_back("alpha_domain_lo", domain.lo.value());
  report.scalars.emplace_back("alpha_domain_hi", domain.hi.value());
  return report;
}

inline Report run_oracle(StrictObject& params) {
  const std::int64_t n = params.integer("n");
  const RatePair rates{param_proportion(params, "rj"), param_proportion(params, "rk")};
  std::optional<Proportion> alpha;
  if (params.has("alpha")) alpha = param_proportion(params, "alpha");
  const std::int64_t cap = params.integer_or("cap", 10'000);
  params.done();

  const auto result = sensitivity::oracle_bounds(n, rates, alpha, cap);
  Report report;
  report.command = "oracle";
  report.scalars.emplace_back("n", n);
  report.scalars.emplace_back("r_j", rates.r_j.value());
  report.scalars.emplace_back("r_k", rates.r_k.value());
  if (alpha) report.scalars.emplace_back("alpha", alpha->value());
  report.scalars.emplace_back("U", result.bounds.upper.value());
  report.scalars.emplace_back("L", result.bounds.lower.value());
  report.scalars.emplace_back("feasible_tables", result.feasible_tables);
  return report;
}

inline Value cell_value(const std::optional<double>& cell) {
  if (cell) return Value{*cell};
  return Value{std::string("external")};
}

inline Report run_transport(StrictObject& params) {
  transport::TransportScenario scenario;
  scenario.n = params.integer("n");
  scenario.p = param_proportion(params, "p");
  const bool has_q = params.has("q");
  if (has_q) scenario.q = param_proportion(params, "q");
  if (params.has("nstar")) scenario.n_star = params.integer("nstar");
  params.done();
  scenario.validate();

  const std::int64_t min_nstar = transport::min_nstar_for_dominance(scenario.n, scenario.p);
  Report report;
  report.command = "transport";
  report.scalars.emplace_back("n", scenario.n);
  report.scalars.emplace_back("p", scenario.p.value());
  report.scalars.emplace_back("min_nstar", min_nstar);
  if (!has_q) return report;

  if (!scenario.n_star) scenario.n_star = min_nstar;
  const auto randomized = transport::randomized_cells(scenario);
  const auto opposites = transport::opposites_cells(scenario);
  report.scalars.emplace_back("q", scenario.q.value());
  report.scalars.emplace_back("nstar", *scenario.n_star);
  report.scalars.emplace_back("dominates", transport::dominance_check(randomized, opposites));

  TableData cells;
  cells.name = "cells";
  cells.columns = {"design", "n_jj", "n_jk", "n_kj", "n_kk"};
  cells.rows.push_back({Value{std::string("randomized")}, cell_value(randomized.n_jj),
                        Value{randomized.n_jk}, Value{randomized.n_kj},
                        cell_value(randomized.n_kk)});
  cells.rows.push_back({Value{std::string("opposites")}, cell_value(opposites.n_jj),
                        Value{opposites.n_jk}, Value{opposites.n_kj},
                        cell_value(opposites.n_kk)});
  report.tables.push_back(std::move(cells));
  return report;
}

inline Report run_td_sim(StrictObject& params, std::uint64_t seed) {
  const json cohort_spec = resolve_spec(params.require("cohort"), "cohort");
  const std::int64_t draws = params.integer_or("draws", 100'000);
  const std::int64_t cap = params.integer_or("cap", tdesign::kDefaultEnumerationCap);
  params.done();
  if (draws < 1) throw Error(ErrorKind::bad_config, "'draws' must be >= 1");

  const auto cohort = config::parse_cohort(cohort_spec);
  const auto design = tdesign::compute_K(cohort);

  Report report;
  report.command = "td-sim";
  report.scalars.emplace_back("n", static_cast<std::int64_t>(cohort.size()));
  report.scalars.emplace_back("m", static_cast<std::int64_t>(cohort.subsample_size()));
  report.scalars.emplace_back("p", cohort.treated_fraction().value());
  report.scalars.emplace_back("draws", draws);
  report.scalars.emplace_back("seed", static_cast<std::int64_t>(seed));
  report.scalars.emplace_back("window_length", design.length);
  report.scalars.emplace_back("sigma2_min", design.sigma2_min);
  report.scalars.emplace_back("K", design.k);

  const bool enumerable =
      tdesign::subset_space_size(cohort.size(), cohort.subsample_size(), cap) <= cap;
  tdesign::InclusionSummary inclusion;
  if (enumerable) {
    const auto empirical = tdesign::td_distribution(cohort, static_cast<std::uint64_t>(draws),
                                                    SeededStream{seed, 0}, cap);
    const auto uniform =
        tdesign::randomized_distribution(cohort.size(), cohort.subsample_size(), cap);
    report.scalars.emplace_back("tv_distance", tdesign::tv_distance(empirical, uniform));
    inclusion = tdesign::inclusion_from_distribution(empirical, cohort.treated_fraction().value());
  } else {
    inclusion =
        tdesign::td_inclusion_probs(cohort, static_cast<std::uint64_t>(draws), SeededStream{seed, 0});
  }
  report.scalars.emplace_back("max_inclusion_deviation", inclusion.max_abs_deviation);

  TableData table;
  table.name = "inclusion_probabilities";
  table.columns = {"member", "probability"};
  for (std::size_t i = 0; i < inclusion.probs.size(); ++i) {
    table.rows.push_back({Value{static_cast<std::int64_t>(i)}, Value{inclusion.probs[i]}});
  }
  report.tables.push_back(std::move(table));
  return report;
}

inline Report run_k_sweep(StrictObject& params, std::uint64_t seed) {
  const json cohort_spec = resolve_spec(params.require("cohort"), "cohort");
  const auto sigmas = config::number_array(params.require("sigmas"), "sigmas");
  const std::int64_t draws = params.integer_or("draws", 100'000);
  const std::int64_t cap = params.integer_or("cap", tdesign::kDefaultEnumerationCap);
  params.done();
  if (draws < 1) throw Error(ErrorKind::bad_config, "'draws' must be >= 1");

  const auto cohort = config::parse_cohort(cohort_spec);
  const auto points = tdesign::k_sweep(cohort, sigmas, static_cast<std::uint64_t>(draws),
                                       SeededStream{seed, 0}, cap);

  Report report;
  report.command = "k-sweep";
  report.scalars.emplace_back("n", static_cast<std::int64_t>(cohort.size()));
  report.scalars.emplace_back("m", static_cast<std::int64_t>(cohort.subsample_size()));
  report.scalars.emplace_back("draws", draws);
  report.scalars.emplace_back("seed", static_cast<std::int64_t>(seed));

  TableData table;
  table.name = "sweep";
  table.columns = {"sigma", "K", "distance", "diagnostic"};
  for (const auto& point : points) {
    table.rows.push_back(
        {Value{point.sigma}, Value{point.k}, Value{point.distance},
         Value{std::string(point.distance_kind == tdesign::DistanceKind::tv ? "tv" : "inclusion")}});
  }
  report.tables.push_back(std::move(table));
  return report;
}

void write_density_file(const rdd::RddScenario& scenario, const std::string& path);

inline Report run_rdd_sim(StrictObject& params, std::uint64_t seed) {
  const json scenario_spec = resolve_spec(params.require("scenario"), "scenario");
  const std::int64_t n_pop = params.integer_or("n_pop", 1'000'000);
  const auto emit_density = params.text_optional("emit_density");
  params.done();
  if (n_pop < 1) throw Error(ErrorKind::bad_config, "'n_pop' must be >= 1");

  const auto scenario = config::parse_rdd_scenario(scenario_spec);
  const auto result =
      rdd::simulate_rdd(scenario, static_cast<std::uint64_t>(n_pop), SeededStream{seed, 0});

  Report report;
  report.command = "rdd-sim";
  report.scalars.emplace_back("n_pop", n_pop);
  report.scalars.emplace_back("seed", static_cast<std::int64_t>(seed));
  report.scalars.emplace_back("cutoff", scenario.cutoff);
  report.scalars.emplace_back("delta", scenario.delta);
  const auto window = scenario.effective_latent_window();
  report.scalars.emplace_back("latent_window_lo", window.first);
  report.scalars.emplace_back("latent_window_hi", window.second);
  report.scalars.emplace_back("window_estimate", result.window_estimate);
  report.scalars.emplace_back("true_window_ate", result.true_window_ate);
  report.scalars.emplace_back("rate_above", result.rate_above);
  report.scalars.emplace_back("rate_below", result.rate_below);
  report.scalars.emplace_back("mc_se", result.mc_se);
  report.scalars.emplace_back("n_window", result.n_window);
  report.scalars.emplace_back("n_above", result.n_above);
  report.scalars.emplace_back("n_below", result.n_below);
  report.scalars.emplace_back("n_latent_window", result.n_latent_window);
  if (result.warning) report.scalars.emplace_back("warning", *result.warning);

  if (emit_density) write_density_file(scenario, *emit_density);
  return report;
}

inline Report run_confounding(StrictObject& params) {
  const json cohort_spec = resolve_spec(params.require("cohort"), "cohort");
  const double tolerance = params.number_or("tolerance", 1e-9);
  params.done();

  const auto cohort = config::parse_potential_outcomes(cohort_spec);
  const auto verdict = sensitivity::check_conditional_no_confounding(cohort, tolerance);

  Report report;
  report.command = "confounding";
  report.scalars.emplace_back("tolerance", tolerance);
  report.scalars.emplace_back("marginal_holds", verdict.marginal_holds);
  report.scalars.emplace_back("conditional_holds", verdict.conditional_holds);

  TableData marginal;
  marginal.name = "marginal_checks";
  marginal.columns = {"arm", "potential_mean", "observed_mean", "within_tolerance"};
  for (const auto& check : verdict.marginal_checks) {
    marginal.rows.push_back({Value{static_cast<std::int64_t>(check.arm)},
                             Value{check.potential_mean}, Value{check.observed_mean},
                             Value{check.within_tolerance}});
  }
  report.tables.push_back(std::move(marginal));

  TableData conditional;
  conditional.name = "discrepancies";
  conditional.columns = {"condition_arm", "shift", "lhs", "rhs", "within_tolerance"};
  for (const auto& row : verdict.discrepancies) {
    conditional.rows.push_back({Value{static_cast<std::int64_t>(row.condition_arm)},
                                Value{static_cast<std::int64_t>(row.shift)}, Value{row.lhs},
                                Value{row.rhs}, Value{row.within_tolerance}});
  }
  report.tables.push_back(std::move(conditional));
  return report;
}

inline Report dispatch(const RunConfig& config) {
  StrictObject params(config.params, "params for '" + config.command + "'");
  if (config.command == "bounds") return run_bounds(params);
  if (config.command == "oracle") return run_oracle(params);
  if (config.command == "transport") return run_transport(params);
  if (config.command == "td-sim") return run_td_sim(params, config.seed);
  if (config.command == "k-sweep") return run_k_sweep(params, config.seed);
  if (config.command == "rdd-sim") return run_rdd_sim(params, config.seed);
  if (config.command == "confounding") return run_confounding(params);
  throw Error(ErrorKind::bad_config, "unknown command '" + config.command + "'");
}

// Relative output paths honor TRIALKIT_OUT_DIR when it is set.
inline std::string resolve_output_path(const std::string& path) {
  if (path.empty() || path.front() == '/') return path;
  const char* base = std::getenv("TRIALKIT_OUT_DIR");
  if (base == nullptr || base[0] == '\0') return path;
  std::string resolved(base);
  if (resolved.back() != '/') resolved.push_back('/');
  return resolved + path;
}

inline void write_density_file(const rdd::RddScenario& scenario, const std::string& path) {
  const auto grid = rdd::default_density_grid(scenario, scenario.cutoff);
  const auto density = rdd::conditional_latent_density(scenario, scenario.cutoff, grid);
  const std::string resolved = resolve_output_path(path);
  std::ofstream out(resolved);
  if (!out) {
    throw Error(ErrorKind::bad_config, "cannot open emit_density path '" + resolved + "'");
  }
  out << "u,density\n";
  for (const auto& point : density) {
    out << report::detail::roundtrip(point.u) << "," << report::detail::roundtrip(point.density)
        << "\n";
  }
}

}  // namespace detail

inline void emit(const report::Report& rendered, OutputFormat format, std::ostream& out) {
  switch (format) {
    case OutputFormat::table:
      report::write_table(rendered, out);
      break;
    case OutputFormat::csv:
      report::write_csv(rendered, out);
      break;
    case OutputFormat::json_format:
      report::write_json(rendered, out);
      break;
  }
}

// Executes one configured run. Returns the process exit status: 0 success,
// 2 validation error, 3 infeasibility, 4 simulation-scale error, 1 internal.
inline int run(const RunConfig& config, std::ostream& out, std::ostream& diag) {
  try {
    const auto rendered = detail::dispatch(config);
    if (!config.output_path.empty()) {
      const std::string resolved = detail::resolve_output_path(config.output_path);
      std::ofstream file(resolved);
      if (!file) {
        throw Error(ErrorKind::bad_config, "cannot open output_path '" + resolved + "'");
      }
      emit(rendered, config.format, file);
    } else {
      emit(rendered, config.format, out);
    }
    return 0;
  } catch (const Error& e) {
    diag << "error: " << e.what() << "\n";
    return e.exit_status();
  } catch (const std::exception& e) {
    diag << "internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace trialkit::cli
