// Seeded data generation, Monte Carlo orchestration of the experiments,
// error aggregation and CSV persistence.
//
// Seed scheme: every run derives its own rng stream from
// (master_seed, N, B, run_index) through a splitmix64 chain, so sweeps never
// collide and records are reproducible independently of execution order.
#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <iomanip>
#include <limits>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cot/estimators.hpp"
#include "cot/measure.hpp"
#include "cot/policies.hpp"
#include "cot/transport.hpp"

namespace cot {

// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t sample_size,
                                 double budget, std::uint64_t run_index) {
  std::uint64_t budget_bits;
  static_assert(sizeof(budget_bits) == sizeof(budget));
  std::memcpy(&budget_bits, &budget, sizeof(budget_bits));
  std::uint64_t s = mix64(master_seed);
  s = mix64(s ^ sample_size);
  s = mix64(s ^ budget_bits);
  s = mix64(s ^ run_index);
  return s;
}

// ---------------------------------------------------------------------------
// Data generation.
// ---------------------------------------------------------------------------

inline SampleSequence sample_gaussian(int n, double mean, double variance, std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("sample_gaussian: n must be >= 1");
  if (!(variance > 0.0)) throw std::invalid_argument("sample_gaussian: variance must be > 0");
  std::normal_distribution<double> normal(mean, std::sqrt(variance));
  std::vector<Sample> samples;
  samples.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) samples.push_back({normal(rng)});
  return SampleSequence(std::move(samples));
}

// Inverse-transform draw lambda * (-ln u)^(1/k) for u in (0, 1].
inline double weibull_inverse(double u, double scale_lambda, double shape_k) {
  return scale_lambda * std::pow(-std::log(u), 1.0 / shape_k);
}

inline SampleSequence sample_weibull(int n, double scale_lambda, double shape_k,
                                     std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("sample_weibull: n must be >= 1");
  if (!(scale_lambda > 0.0)) throw std::invalid_argument("sample_weibull: lambda must be > 0");
  if (!(shape_k > 0.0)) throw std::invalid_argument("sample_weibull: shape k must be > 0");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Sample> samples;
  samples.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double u = 1.0 - unit(rng);  // maps [0,1) to (0,1]
    samples.push_back({weibull_inverse(u, scale_lambda, shape_k)});
  }
  return SampleSequence(std::move(samples));
}

// ---------------------------------------------------------------------------
// Configuration and records.
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  std::string experiment;  // gaussian_variance | weibull_scale | irl_weights | custom
  double theta0 = 0.0;
  std::vector<int> sample_sizes;
  std::vector<double> budgets;
  int proposals_M = 1000;
  CostFunctionSpec cost = IndicatorCost{};
  std::string policy = "batch";
  int mc_runs = 100;
  std::uint64_t master_seed = 0;
  double epsilon = 1e-5;
  SolverOptions solver;

  // estimator parameters
  double shape_k = 8.0;      // weibull_scale
  double beta = -0.001;      // irl_weights
  double theta_hat0 = 0.5;   // irl_weights: the student's pre-correction weight
  double gaussian_mean = 0.0;

  std::vector<std::vector<double>> irl_features;  // one count sequence per feature
  std::vector<double> irl_theta0;                 // one true weight per feature

  std::string samples_file;    // custom experiment input
  std::string estimator_name;  // custom experiment estimator id
};

struct RunRecord {
  int run_id = 0;
  int sample_size = 0;
  double budget = 0.0;
  int proposals_M = 0;
  std::string policy;
  std::string estimator;
  double theta0 = 0.0;
  double theta_hat = 0.0;
  double theta_tilde = 0.0;
  double err_before = 0.0;
  double err_after = 0.0;
  int num_changes = 0;
  double cost_used = 0.0;
  std::uint64_t seed = 0;
  std::string status = "ok";
};

namespace detail {

inline std::string format_float(double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

inline std::string sanitize_status(std::string message) {
  for (char& c : message) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return message.empty() ? std::string("failed") : message;
}

}  // namespace detail

inline const char* records_csv_header() {
  return "run_id,N,B,M,policy,estimator,theta0,theta_hat,theta_tilde,err_before,err_after,"
         "num_changes,cost_used,seed,status";
}

inline void write_records_csv(const std::vector<RunRecord>& records, std::ostream& out) {
  out << records_csv_header() << '\n';
  for (const RunRecord& r : records) {
    out << r.run_id << ',' << r.sample_size << ',' << detail::format_float(r.budget) << ','
        << r.proposals_M << ',' << r.policy << ',' << r.estimator << ','
        << detail::format_float(r.theta0) << ',' << detail::format_float(r.theta_hat) << ','
        << detail::format_float(r.theta_tilde) << ',' << detail::format_float(r.err_before) << ','
        << detail::format_float(r.err_after) << ',' << r.num_changes << ','
        << detail::format_float(r.cost_used) << ',' << r.seed << ',' << r.status << '\n';
  }
}

inline std::vector<RunRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw std::invalid_argument("results csv: missing header");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != records_csv_header()) {
    throw std::invalid_argument("results csv: unexpected header");
  }
  std::vector<RunRecord> records;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream row(line);
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() != 15) {
      throw std::invalid_argument("results csv: malformed row: " + line);
    }
    RunRecord r;
    try {
      r.run_id = std::stoi(fields[0]);
      r.sample_size = std::stoi(fields[1]);
      r.budget = std::stod(fields[2]);
      r.proposals_M = std::stoi(fields[3]);
      r.policy = fields[4];
      r.estimator = fields[5];
      r.theta0 = std::stod(fields[6]);
      r.theta_hat = std::stod(fields[7]);
      r.theta_tilde = std::stod(fields[8]);
      r.err_before = std::stod(fields[9]);
      r.err_after = std::stod(fields[10]);
      r.num_changes = std::stoi(fields[11]);
      r.cost_used = std::stod(fields[12]);
      r.seed = std::stoull(fields[13]);
      r.status = fields[14];
    } catch (const std::exception&) {
      throw std::invalid_argument("results csv: malformed row: " + line);
    }
    records.push_back(std::move(r));
  }
  if (records.empty()) {
    throw std::invalid_argument("results csv: no data rows");
  }
  return records;
}

// ---------------------------------------------------------------------------
// The teacher pipeline for one run: assemble -> solve -> pmf -> policy.
// ---------------------------------------------------------------------------

inline InterventionResult run_teacher_pipeline(const SampleSequence& seq,
                                               const Estimator& estimator,
                                               const ParameterVector& theta0,
                                               const CostFunctionSpec& cost,
                                               const TeacherConfig& config,
                                               double gradient_epsilon = 1e-5,
                                               const SolverOptions& solver_options = {}) {
  if (config.policy == PolicyKind::RecedingHorizon) {
    return receding_horizon_policy(seq, cost, estimator, theta0, config, solver_options,
                                   gradient_epsilon);
  }
  const StateSpace targets = StateSpace::from_sequence(seq);
  const TransportProblem problem =
      assemble_problem(seq, targets, estimator, theta0, cost, config.budget, gradient_epsilon);
  const TransportPlanAlpha plan = solve_alpha(problem, solver_options);
  const ConditionalPmf pmf = conditional_pmf(plan, problem.source, problem.r);
  if (config.policy == PolicyKind::Greedy) {
    return greedy_policy(seq, pmf, problem.source, problem.targets, cost, estimator, theta0,
                         config);
  }
  std::mt19937_64 rng(config.seed);
  return batch_policy(seq, pmf, problem.source, problem.targets, cost, estimator, theta0, config,
                      rng);
}

namespace detail {

struct RunSpec {
  SampleSequence sequence;
  Estimator estimator;
  ParameterVector theta0;
  std::string estimator_label;
};

inline RunRecord execute_run(const RunSpec& spec, const ExperimentConfig& config, int run_id,
                             int sample_size, double budget, std::uint64_t seed) {
  RunRecord record;
  record.run_id = run_id;
  record.sample_size = sample_size;
  record.budget = budget;
  record.proposals_M = config.proposals_M;
  record.policy = config.policy;
  record.estimator = spec.estimator_label;
  record.theta0 = spec.theta0.dim() == 1 ? spec.theta0.scalar() : 0.0;
  record.seed = seed;
  try {
    const ParameterVector theta_hat = spec.estimator(empirical_measure(spec.sequence));

    TeacherConfig teacher;
    teacher.budget = budget;
    teacher.num_proposals = config.proposals_M;
    teacher.policy = parse_policy(config.policy);
    // Sub-stream so candidate draws never replay the data-generation stream.
    teacher.seed = mix64(seed ^ 0x7465616368657231ULL);

    const InterventionResult result = run_teacher_pipeline(
        spec.sequence, spec.estimator, spec.theta0, config.cost, teacher, config.epsilon,
        config.solver);

    record.theta_hat = theta_hat.scalar();
    record.theta_tilde = result.theta_tilde.scalar();
    record.err_before = parameter_distance(spec.theta0, theta_hat);
    record.err_after = parameter_distance(spec.theta0, result.theta_tilde);
    record.num_changes = result.num_changes;
    record.cost_used = result.cost_used;
  } catch (const std::exception& e) {
    record.status = sanitize_status(std::string("failed: ") + e.what());
    record.theta_hat = std::numeric_limits<double>::quiet_NaN();
    record.theta_tilde = std::numeric_limits<double>::quiet_NaN();
    record.err_before = std::numeric_limits<double>::quiet_NaN();
    record.err_after = std::numeric_limits<double>::quiet_NaN();
  }
  return record;
}

}  // namespace detail

inline void validate_config(const ExperimentConfig& config) {
  if (config.experiment != "gaussian_variance" && config.experiment != "weibull_scale" &&
      config.experiment != "irl_weights" && config.experiment != "custom") {
    throw std::invalid_argument("config: unknown experiment '" + config.experiment + "'");
  }
  if (config.mc_runs < 1) throw std::invalid_argument("config: mc_runs must be >= 1");
  if (config.proposals_M < 1) throw std::invalid_argument("config: M must be >= 1");
  if (config.budgets.empty()) throw std::invalid_argument("config: budgets must be nonempty");
  for (double b : config.budgets) {
    if (!(b >= 0.0)) throw std::invalid_argument("config: budgets must be nonnegative");
  }
  parse_policy(config.policy);
  validate_cost_spec(config.cost);
  if (!(config.epsilon > 0.0 && config.epsilon < 1.0)) {
    throw std::invalid_argument("config: epsilon must lie in (0, 1)");
  }
  if (config.experiment == "gaussian_variance" || config.experiment == "weibull_scale") {
    if (config.sample_sizes.empty()) {
      throw std::invalid_argument("config: sample_sizes must be nonempty");
    }
    for (int n : config.sample_sizes) {
      if (n < 1) throw std::invalid_argument("config: sample sizes must be >= 1");
    }
  }
  if (config.experiment == "gaussian_variance" && !(config.theta0 > 0.0)) {
    throw std::invalid_argument("config: gaussian_variance needs theta0 (true variance) > 0");
  }
  if (config.experiment == "weibull_scale") {
    if (!(config.theta0 > 0.0)) {
      throw std::invalid_argument("config: weibull_scale needs theta0 (true scale) > 0");
    }
    if (!(config.shape_k > 0.0)) throw std::invalid_argument("config: shape_k must be > 0");
  }
  if (config.experiment == "irl_weights") {
    if (config.irl_features.empty()) {
      throw std::invalid_argument("config: irl_weights needs irl_features");
    }
    if (config.irl_theta0.size() != config.irl_features.size()) {
      throw std::invalid_argument("config: irl_theta0 must list one true weight per feature");
    }
    if (!(config.beta < 0.0)) throw std::invalid_argument("config: beta must be negative");
    for (const auto& counts : config.irl_features) {
      if (counts.empty()) throw std::invalid_argument("config: empty feature count sequence");
    }
  }
  if (config.experiment == "custom") {
    if (config.samples_file.empty()) {
      throw std::invalid_argument("config: custom experiment needs samples_file");
    }
    if (config.estimator_name.empty()) {
      throw std::invalid_argument("config: custom experiment needs estimator");
    }
  }
}

inline Estimator make_named_estimator(const std::string& name, const ExperimentConfig& config) {
  if (name == "variance") return make_variance_estimator();
  if (name == "mean") return make_mean_estimator();
  if (name == "weibull_scale") return make_weibull_scale_estimator(config.shape_k);
  throw std::invalid_argument("config: unknown estimator '" + name + "'");
}

// Run the full sweep. Failure of one run is recorded in its status column
// rather than aborting the sweep.
inline std::vector<RunRecord> run_monte_carlo(const ExperimentConfig& config) {
  validate_config(config);
  std::vector<RunRecord> records;

  if (config.experiment == "irl_weights") {
    for (std::size_t feature = 0; feature < config.irl_features.size(); ++feature) {
      const SampleSequence counts = SampleSequence::from_scalars(config.irl_features[feature]);
      const int n = static_cast<int>(counts.size());
      detail::RunSpec spec{
          counts,
          make_irl_weight_estimator(config.theta_hat0, config.beta, counts.scalar_sum(),
                                    counts.size()),
          ParameterVector(config.irl_theta0[feature]),
          "irl_update:phi" + std::to_string(feature + 1)};
      for (double budget : config.budgets) {
        for (int run = 0; run < config.mc_runs; ++run) {
          const std::uint64_t run_index =
              static_cast<std::uint64_t>(feature) * static_cast<std::uint64_t>(config.mc_runs) +
              static_cast<std::uint64_t>(run);
          const std::uint64_t seed = derive_seed(config.master_seed,
                                                 static_cast<std::uint64_t>(n), budget, run_index);
          records.push_back(detail::execute_run(spec, config, run, n, budget, seed));
        }
      }
    }
    return records;
  }

  if (config.experiment == "custom") {
    const SampleSequence seq = read_sample_file(config.samples_file);
    const int n = static_cast<int>(seq.size());
    detail::RunSpec spec{seq, make_named_estimator(config.estimator_name, config),
                         ParameterVector(config.theta0), config.estimator_name};
    for (double budget : config.budgets) {
      for (int run = 0; run < config.mc_runs; ++run) {
        const std::uint64_t seed = derive_seed(config.master_seed, static_cast<std::uint64_t>(n),
                                               budget, static_cast<std::uint64_t>(run));
        records.push_back(detail::execute_run(spec, config, run, n, budget, seed));
      }
    }
    return records;
  }

  const bool gaussian = config.experiment == "gaussian_variance";
  for (int n : config.sample_sizes) {
    for (double budget : config.budgets) {
      for (int run = 0; run < config.mc_runs; ++run) {
        const std::uint64_t seed = derive_seed(config.master_seed, static_cast<std::uint64_t>(n),
                                               budget, static_cast<std::uint64_t>(run));
        std::mt19937_64 rng(seed);
        RunRecord record;
        try {
          detail::RunSpec spec{
              gaussian ? sample_gaussian(n, config.gaussian_mean, config.theta0, rng)
                       : sample_weibull(n, config.theta0, config.shape_k, rng),
              gaussian ? make_variance_estimator()
                       : make_weibull_scale_estimator(config.shape_k),
              ParameterVector(config.theta0), gaussian ? "variance" : "weibull_scale"};
          record = detail::execute_run(spec, config, run, n, budget, seed);
        } catch (const std::exception& e) {
          record.run_id = run;
          record.sample_size = n;
          record.budget = budget;
          record.proposals_M = config.proposals_M;
          record.policy = config.policy;
          record.estimator = gaussian ? "variance" : "weibull_scale";
          record.theta0 = config.theta0;
          record.seed = seed;
          record.status = detail::sanitize_status(std::string("failed: ") + e.what());
        }
        records.push_back(std::move(record));
      }
    }
  }
  return records;
}

// ---------------------------------------------------------------------------
// Aggregation.
// ---------------------------------------------------------------------------

struct SummaryCell {
  int sample_size = 0;
  double budget = 0.0;
  double mean_err_after = 0.0;
  double mean_err_before = 0.0;
  int count = 0;
};

// Mean absolute error per (N, B) over the ok rows, sorted by (N, B).
inline std::vector<SummaryCell> summarize(const std::vector<RunRecord>& records) {
  if (records.empty()) throw std::invalid_argument("summarize: no records");
  std::map<std::pair<int, double>, SummaryCell> cells;
  for (const RunRecord& r : records) {
    if (r.status != "ok") continue;
    SummaryCell& cell = cells[{r.sample_size, r.budget}];
    cell.sample_size = r.sample_size;
    cell.budget = r.budget;
    cell.mean_err_after += r.err_after;
    cell.mean_err_before += r.err_before;
    cell.count += 1;
  }
  std::vector<SummaryCell> result;
  result.reserve(cells.size());
  for (auto& [key, cell] : cells) {
    if (cell.count > 0) {
      cell.mean_err_after /= cell.count;
      cell.mean_err_before /= cell.count;
    }
    result.push_back(cell);
  }
  return result;
}

inline void write_summary_table(const std::vector<SummaryCell>& cells, std::ostream& out) {
  out << std::left << std::setw(8) << "N" << std::setw(12) << "B" << std::setw(16)
      << "mean_|e|" << std::setw(16) << "mean_|e|_pre" << std::setw(8) << "runs" << '\n';
  for (const SummaryCell& cell : cells) {
    std::ostringstream err_after, err_before;
    err_after << std::setprecision(6) << cell.mean_err_after;
    err_before << std::setprecision(6) << cell.mean_err_before;
    out << std::left << std::setw(8) << cell.sample_size << std::setw(12) << cell.budget
        << std::setw(16) << err_after.str() << std::setw(16) << err_before.str() << std::setw(8)
        << cell.count << '\n';
  }
}

}  // namespace cot
