// Command-line entry point: wires JSON configs and sample files to the
// library and emits CSV results, text reports and SVG plots.
//
// Exit codes are stable API: 0 success, 2 usage/config error, 3 runtime
// failure. The CLI never mutates its inputs; all outputs go under --out.
#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cot/estimators.hpp"
#include "cot/harness.hpp"
#include "cot/measure.hpp"
#include "cot/policies.hpp"
#include "cot/report.hpp"
#include "cot/transport.hpp"

namespace cot {
namespace cli {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

namespace detail {

inline CostFunctionSpec parse_cost_string(const std::string& spec) {
  if (spec == "indicator") return IndicatorCost{};
  const std::string prefix = "ceil:";
  if (spec.rfind(prefix, 0) == 0) {
    double scale = 0.0;
    try {
      scale = std::stod(spec.substr(prefix.size()));
    } catch (const std::exception&) {
      throw std::invalid_argument("cost: expected 'indicator' or 'ceil:<scale>', got " + spec);
    }
    if (!(scale >= 0.0)) throw std::invalid_argument("cost: scale must be nonnegative");
    return CeilProportionalCost{scale};
  }
  throw std::invalid_argument("cost: expected 'indicator' or 'ceil:<scale>', got " + spec);
}

inline CostFunctionSpec parse_cost_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type")) {
    throw std::invalid_argument("config: cost must be an object with a 'type' key");
  }
  const std::string type = j.at("type").get<std::string>();
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (key != "type" && key != "scale") {
      throw std::invalid_argument("config: unknown cost key '" + key + "'");
    }
  }
  if (type == "indicator") return IndicatorCost{};
  if (type == "ceil_proportional") {
    if (!j.contains("scale")) {
      throw std::invalid_argument("config: ceil_proportional cost needs 'scale'");
    }
    const double scale = j.at("scale").get<double>();
    if (!(scale >= 0.0)) throw std::invalid_argument("config: cost scale must be nonnegative");
    return CeilProportionalCost{scale};
  }
  throw std::invalid_argument("config: unknown cost type '" + type + "'");
}

inline ExperimentConfig parse_config_json(const nlohmann::json& j) {
  static const std::set<std::string> known_keys = {
      "experiment", "theta0",      "sample_sizes", "budgets",      "M",
      "cost",       "policy",      "mc_runs",      "master_seed",  "shape_k",
      "beta",       "theta_hat",   "irl_features", "irl_theta0",   "gaussian_mean",
      "epsilon",    "samples_file", "estimator"};
  if (!j.is_object()) throw std::invalid_argument("config: top level must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!known_keys.count(key)) {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }
  ExperimentConfig config;
  if (!j.contains("experiment")) throw std::invalid_argument("config: missing 'experiment'");
  config.experiment = j.at("experiment").get<std::string>();
  if (j.contains("theta0")) config.theta0 = j.at("theta0").get<double>();
  if (j.contains("sample_sizes")) {
    config.sample_sizes = j.at("sample_sizes").get<std::vector<int>>();
  }
  if (!j.contains("budgets")) throw std::invalid_argument("config: missing 'budgets'");
  config.budgets = j.at("budgets").get<std::vector<double>>();
  if (j.contains("M")) config.proposals_M = j.at("M").get<int>();
  if (j.contains("cost")) config.cost = parse_cost_json(j.at("cost"));
  if (j.contains("policy")) config.policy = j.at("policy").get<std::string>();
  if (j.contains("mc_runs")) config.mc_runs = j.at("mc_runs").get<int>();
  if (j.contains("master_seed")) config.master_seed = j.at("master_seed").get<std::uint64_t>();
  if (j.contains("shape_k")) config.shape_k = j.at("shape_k").get<double>();
  if (j.contains("beta")) config.beta = j.at("beta").get<double>();
  if (j.contains("theta_hat")) config.theta_hat0 = j.at("theta_hat").get<double>();
  if (j.contains("irl_features")) {
    config.irl_features = j.at("irl_features").get<std::vector<std::vector<double>>>();
  }
  if (j.contains("irl_theta0")) {
    config.irl_theta0 = j.at("irl_theta0").get<std::vector<double>>();
  }
  if (j.contains("gaussian_mean")) config.gaussian_mean = j.at("gaussian_mean").get<double>();
  if (j.contains("epsilon")) config.epsilon = j.at("epsilon").get<double>();
  if (j.contains("samples_file")) config.samples_file = j.at("samples_file").get<std::string>();
  if (j.contains("estimator")) config.estimator_name = j.at("estimator").get<std::string>();
  validate_config(config);
  return config;
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config: " + path + " is not valid JSON: " + e.what());
  }
  return j;
}

inline void apply_overrides(nlohmann::json& j, const std::vector<std::string>& overrides) {
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    }
    const std::string key = kv.substr(0, eq);
    const std::string raw = kv.substr(eq + 1);
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception&) {
      value = raw;  // fall back to a plain string value
    }
    j[key] = value;
  }
}

inline Estimator estimator_from_flags(const std::string& name, double shape_k, double beta,
                                      double theta_hat, const SampleSequence& seq) {
  if (name == "variance") return make_variance_estimator();
  if (name == "mean") return make_mean_estimator();
  if (name == "weibull_scale") return make_weibull_scale_estimator(shape_k);
  if (name == "irl_update") {
    return make_irl_weight_estimator(theta_hat, beta, seq.scalar_sum(), seq.size());
  }
  throw std::invalid_argument("unknown estimator '" + name + "'");
}

inline void write_index_value_csv(const std::vector<double>& values, std::size_t rows,
                                  std::size_t cols, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "row,col,value\n";
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      out << i << ',' << j << ',' << cot::detail::format_float(values[i * cols + j]) << '\n';
    }
  }
}

struct SolveFlags {
  std::string samples_path;
  std::string estimator = "variance";
  double theta0 = 0.0;
  double budget = 0.0;
  std::string cost = "indicator";
  double shape_k = 8.0;
  double beta = -0.001;
  double theta_hat = 0.5;
  double epsilon = 1e-5;
  double tol = 1e-10;
  int max_iters = 20000;
  std::string out_dir = ".";
};

inline void add_solve_flags(CLI::App* cmd, SolveFlags& flags, bool with_solver_tols) {
  cmd->add_option("--samples", flags.samples_path, "sample file (one observation per line)")
      ->required();
  cmd->add_option("--estimator", flags.estimator,
                  "variance | mean | weibull_scale | irl_update");
  cmd->add_option("--theta0", flags.theta0, "true parameter value")->required();
  cmd->add_option("--budget", flags.budget, "intervention budget B");
  cmd->add_option("--cost", flags.cost, "indicator | ceil:<scale>");
  cmd->add_option("--shape-k", flags.shape_k, "Weibull shape (weibull_scale)");
  cmd->add_option("--beta", flags.beta, "IRL step parameter (irl_update)");
  cmd->add_option("--theta-hat", flags.theta_hat, "IRL pre-correction weight (irl_update)");
  cmd->add_option("--out", flags.out_dir, "output directory");
  if (with_solver_tols) {
    cmd->add_option("--epsilon", flags.epsilon, "gradient perturbation step");
    cmd->add_option("--tol", flags.tol, "solver stopping tolerance");
    cmd->add_option("--max-iters", flags.max_iters, "solver iteration cap");
  }
}

inline int run_simulate(const std::string& config_path, const std::string& out_dir,
                        const std::vector<std::string>& overrides) {
  nlohmann::json j = load_json_file(config_path);
  apply_overrides(j, overrides);
  const ExperimentConfig config = parse_config_json(j);

  std::filesystem::create_directories(out_dir);
  const std::vector<RunRecord> records = run_monte_carlo(config);

  const std::string results_path = (std::filesystem::path(out_dir) / "results.csv").string();
  {
    std::ofstream out(results_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + results_path);
    write_records_csv(records, out);
  }
  const std::string summary_path = (std::filesystem::path(out_dir) / "summary.txt").string();
  {
    std::ofstream out(summary_path);
    if (!out) throw std::runtime_error("cannot write " + summary_path);
    write_summary_table(summarize(records), out);
  }
  std::cout << "wrote " << results_path << " (" << records.size() << " rows) and "
            << summary_path << '\n';
  return kExitOk;
}

inline int run_solve(const SolveFlags& flags) {
  const SampleSequence seq = read_sample_file(flags.samples_path);
  const Estimator estimator =
      estimator_from_flags(flags.estimator, flags.shape_k, flags.beta, flags.theta_hat, seq);
  const CostFunctionSpec cost = parse_cost_string(flags.cost);
  const StateSpace targets = StateSpace::from_sequence(seq);

  const TransportProblem problem = assemble_problem(
      seq, targets, estimator, ParameterVector(flags.theta0), cost, flags.budget, flags.epsilon);

  SolverOptions options;
  options.max_iterations = flags.max_iters;
  options.relative_objective_tol = flags.tol;
  options.displacement_tol = flags.tol;
  const TransportPlanAlpha plan = solve_alpha(problem, options);
  const ConditionalPmf pmf = conditional_pmf(plan, problem.source, problem.r);

  std::filesystem::create_directories(flags.out_dir);
  const auto out = std::filesystem::path(flags.out_dir);
  write_index_value_csv(plan.alpha, plan.rows, plan.cols, (out / "alpha.csv").string());
  write_index_value_csv(pmf.rows, pmf.n, pmf.m, (out / "pmf.csv").string());

  std::cout << "solve: n=" << plan.rows << " m=" << plan.cols
            << " objective=" << plan.objective_value << " iterations=" << plan.iterations
            << " converged=" << (plan.converged ? "yes" : "no")
            << " marginal_residual=" << plan.marginal_residual
            << " budget_slack=" << plan.budget_slack
            << " pmf_row_residual=" << pmf.max_row_residual << '\n';
  return kExitOk;
}

inline int run_oracle(const SolveFlags& flags) {
  const SampleSequence seq = read_sample_file(flags.samples_path);
  const Estimator estimator =
      estimator_from_flags(flags.estimator, flags.shape_k, flags.beta, flags.theta_hat, seq);
  const CostFunctionSpec cost = parse_cost_string(flags.cost);
  const StateSpace targets = StateSpace::from_sequence(seq);

  const InterventionResult result = oracle_search(seq, targets, flags.budget, cost, estimator,
                                                  ParameterVector(flags.theta0));

  std::filesystem::create_directories(flags.out_dir);
  const std::string corrected_path =
      (std::filesystem::path(flags.out_dir) / "corrected.txt").string();
  std::ofstream out(corrected_path);
  if (!out) throw std::runtime_error("cannot write " + corrected_path);
  write_samples(result.corrected, out);

  const ParameterVector theta_hat = estimator(empirical_measure(seq));
  std::cout << "oracle: error="
            << parameter_distance(ParameterVector(flags.theta0), result.theta_tilde)
            << " original_error="
            << parameter_distance(ParameterVector(flags.theta0), theta_hat)
            << " cost_used=" << result.cost_used << " num_changes=" << result.num_changes
            << " feasible_assignments=" << result.proposals_feasible << " corrected="
            << corrected_path << '\n';
  return kExitOk;
}

inline int run_report(const std::string& results_path, const std::string& out_dir) {
  std::ifstream in(results_path);
  if (!in) throw std::invalid_argument("report: cannot open " + results_path);
  const std::vector<RunRecord> records = read_records_csv(in);
  const std::vector<SummaryCell> cells = summarize(records);
  if (cells.empty()) throw std::invalid_argument("report: no successful rows to aggregate");

  std::filesystem::create_directories(out_dir);
  const auto out = std::filesystem::path(out_dir);
  {
    std::ofstream table(out / "summary.txt");
    if (!table) throw std::runtime_error("cannot write summary.txt");
    write_error_matrix(cells, table);
  }
  {
    std::ofstream svg(out / "errors.svg");
    if (!svg) throw std::runtime_error("cannot write errors.svg");
    write_error_svg(cells, svg);
  }
  std::cout << "wrote " << (out / "summary.txt").string() << " and "
            << (out / "errors.svg").string() << '\n';
  return kExitOk;
}

}  // namespace detail

inline int run(int argc, const char* const* argv) {
  CLI::App app{"correctional learning via optimal transport"};
  app.require_subcommand(1);

  auto* simulate = app.add_subcommand("simulate", "run a Monte Carlo experiment sweep");
  std::string config_path;
  std::string simulate_out = "out";
  std::vector<std::string> overrides;
  simulate->add_option("--config", config_path, "experiment config (JSON)")->required();
  simulate->add_option("--out", simulate_out, "output directory");
  simulate->add_option("--set", overrides, "override a config key, e.g. --set M=100");

  detail::SolveFlags solve_flags;
  auto* solve = app.add_subcommand("solve", "solve one transport problem and dump alpha/pmf");
  detail::add_solve_flags(solve, solve_flags, /*with_solver_tols=*/true);

  detail::SolveFlags oracle_flags;
  auto* oracle = app.add_subcommand("oracle", "exhaustive search over corrected sequences");
  detail::add_solve_flags(oracle, oracle_flags, /*with_solver_tols=*/false);

  auto* report = app.add_subcommand("report", "summarize a results CSV into a table and SVG");
  std::string results_path;
  std::string report_out = "out";
  report->add_option("--results", results_path, "results CSV from simulate")->required();
  report->add_option("--out", report_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (simulate->parsed()) return detail::run_simulate(config_path, simulate_out, overrides);
    if (solve->parsed()) return detail::run_solve(solve_flags);
    if (oracle->parsed()) return detail::run_oracle(oracle_flags);
    if (report->parsed()) return detail::run_report(results_path, report_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace cli
}  // namespace cot
