// Teacher intervention policies: turn a solved transport plan into an actual
// corrected sequence under the budget. Three policies ship (batch sampling,
// greedy by correction probability, receding horizon with re-solves) plus an
// exhaustive oracle for verification.
//
// Every policy guarantees a hard budget (sequence_cost <= B) and never-worse
// estimation error: a run that fails to strictly improve on the original
// sequence falls back to it bit-exactly.
#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "cot/estimators.hpp"
#include "cot/measure.hpp"
#include "cot/transport.hpp"

namespace cot {

enum class PolicyKind { Batch, Greedy, RecedingHorizon };

inline const char* policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Batch: return "batch";
    case PolicyKind::Greedy: return "greedy";
    case PolicyKind::RecedingHorizon: return "receding_horizon";
  }
  return "unknown";
}

inline PolicyKind parse_policy(const std::string& name) {
  if (name == "batch") return PolicyKind::Batch;
  if (name == "greedy") return PolicyKind::Greedy;
  if (name == "receding_horizon") return PolicyKind::RecedingHorizon;
  throw std::invalid_argument("unknown policy: " + name);
}

struct TeacherConfig {
  double budget = 0.0;
  int num_proposals = 1;  // M, batch policy only
  PolicyKind policy = PolicyKind::Batch;
  std::uint64_t seed = 0;
};

struct InterventionResult {
  SampleSequence corrected;
  ParameterVector theta_tilde;
  double cost_used = 0.0;
  int num_changes = 0;
  int proposals_feasible = 0;
  bool fell_back = false;
};

namespace detail {

inline int count_changes(const SampleSequence& original, const SampleSequence& corrected) {
  int changes = 0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    if (!(original[i] == corrected[i])) ++changes;
  }
  return changes;
}

inline InterventionResult keep_original(const SampleSequence& original,
                                        const ParameterVector& theta_hat) {
  InterventionResult result;
  result.corrected = original;
  result.theta_tilde = theta_hat;
  result.cost_used = 0.0;
  result.num_changes = 0;
  result.fell_back = true;
  return result;
}

}  // namespace detail

// Independently replace each sample by a draw from its state's pmf row;
// draws happen in sequence order so runs are reproducible per seed.
inline SampleSequence sample_modified_sequence(const SampleSequence& original,
                                               const ConditionalPmf& pmf,
                                               const StateSpace& source,
                                               const StateSpace& targets,
                                               std::mt19937_64& rng) {
  std::vector<Sample> corrected;
  corrected.reserve(original.size());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const Sample& x : original) {
    auto row = source.index_of(x);
    if (!row) {
      throw std::invalid_argument("sample_modified_sequence: sample not in the source states");
    }
    const double u = unit(rng);
    double cumulative = 0.0;
    std::size_t pick = pmf.m;
    std::size_t last_positive = pmf.m;
    for (std::size_t j = 0; j < pmf.m; ++j) {
      const double p = pmf(*row, j);
      if (p > 0.0) last_positive = j;
      cumulative += p;
      if (u < cumulative) {
        pick = j;
        break;
      }
    }
    if (pick == pmf.m) pick = last_positive;  // guards against rounding in the row sum
    corrected.push_back(targets.state(pick));
  }
  return SampleSequence(std::move(corrected));
}

// Draw M candidate sequences from the pmf, keep the budget-feasible ones, and
// return the candidate (or the original) with the lowest estimation error.
//
// Candidates are drawn and scored as target-state index vectors against a
// prebuilt cost table; only the winner is materialized as a sequence. Scoring
// uses the measure over the full target support with zero weights on unused
// states, which evaluates bit-identically to the deduplicated measure (zero
// weights contribute exact no-op terms in the canonical accumulation).
inline InterventionResult batch_policy(const SampleSequence& original, const ConditionalPmf& pmf,
                                       const StateSpace& source, const StateSpace& targets,
                                       const CostFunctionSpec& cost, const Estimator& estimator,
                                       const ParameterVector& theta0, const TeacherConfig& config,
                                       std::mt19937_64& rng) {
  if (config.num_proposals < 1) {
    throw std::invalid_argument("batch_policy: M must be >= 1");
  }
  const ParameterVector theta_hat = estimator(empirical_measure(original));
  const double original_error = parameter_distance(theta0, theta_hat);

  const std::size_t n_samples = original.size();
  const std::size_t m = targets.size();
  const CostMatrix cost_table = build_cost_matrix(source, targets, cost);
  std::vector<std::size_t> sample_state(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    auto row = source.index_of(original[i]);
    if (!row) {
      throw std::invalid_argument("batch_policy: sample not in the source states");
    }
    sample_state[i] = *row;
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::size_t> assignment(n_samples), best_assignment;
  std::vector<double> weights(m);
  double best_error = original_error;
  double best_cost = 0.0;
  bool improved = false;
  int feasible = 0;

  for (int k = 0; k < config.num_proposals; ++k) {
    double candidate_cost = 0.0;
    std::fill(weights.begin(), weights.end(), 0.0);
    for (std::size_t i = 0; i < n_samples; ++i) {
      const std::size_t row = sample_state[i];
      const double u = unit(rng);
      double cumulative = 0.0;
      std::size_t pick = m;
      std::size_t last_positive = m;
      for (std::size_t j = 0; j < m; ++j) {
        const double p = pmf(row, j);
        if (p > 0.0) last_positive = j;
        cumulative += p;
        if (u < cumulative) {
          pick = j;
          break;
        }
      }
      if (pick == m) pick = last_positive;
      assignment[i] = pick;
      candidate_cost += cost_table(row, pick);
      weights[pick] += 1.0;
    }
    if (candidate_cost > config.budget) continue;
    ++feasible;
    for (double& w : weights) w /= static_cast<double>(n_samples);
    const ParameterVector theta = estimator(EmpiricalMeasure(targets, weights));
    const double error = parameter_distance(theta0, theta);
    if (error < best_error) {
      best_error = error;
      best_cost = candidate_cost;
      best_assignment = assignment;
      improved = true;
    }
  }

  InterventionResult best = detail::keep_original(original, theta_hat);
  best.proposals_feasible = feasible;
  if (improved) {
    std::vector<Sample> corrected(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) corrected[i] = targets.state(best_assignment[i]);
    best.corrected = SampleSequence(std::move(corrected));
    best.theta_tilde = estimator(empirical_measure(best.corrected));
    best.cost_used = best_cost;
    best.num_changes = detail::count_changes(original, best.corrected);
    best.fell_back = false;
  }
  return best;
}

// Deterministic policy: rank every non-identity per-sample change by its
// correction probability (ties: lower cost, lower sample index, lower target
// index), apply changes in rank order while the budget allows, at most one
// change per sample, then re-estimate once.
inline InterventionResult greedy_policy(const SampleSequence& original, const ConditionalPmf& pmf,
                                        const StateSpace& source, const StateSpace& targets,
                                        const CostFunctionSpec& cost, const Estimator& estimator,
                                        const ParameterVector& theta0,
                                        const TeacherConfig& config) {
  const ParameterVector theta_hat = estimator(empirical_measure(original));
  const double original_error = parameter_distance(theta0, theta_hat);

  struct Change {
    double probability;
    double cost;
    std::size_t sample;
    std::size_t target;
  };
  std::vector<Change> changes;
  for (std::size_t i = 0; i < original.size(); ++i) {
    auto row = source.index_of(original[i]);
    if (!row) {
      throw std::invalid_argument("greedy_policy: sample not in the source states");
    }
    for (std::size_t j = 0; j < pmf.m; ++j) {
      if (targets.state(j) == original[i]) continue;
      const double p = pmf(*row, j);
      if (p <= 0.0) continue;
      changes.push_back({p, evaluate_cost(cost, original[i], targets.state(j)), i, j});
    }
  }
  std::sort(changes.begin(), changes.end(), [](const Change& a, const Change& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    return std::tie(a.cost, a.sample, a.target) < std::tie(b.cost, b.sample, b.target);
  });

  std::vector<Sample> corrected = original.samples();
  std::vector<char> touched(original.size(), 0);
  double spent = 0.0;
  for (const Change& change : changes) {
    if (touched[change.sample]) continue;
    if (spent + change.cost > config.budget) continue;
    corrected[change.sample] = targets.state(change.target);
    touched[change.sample] = 1;
    spent += change.cost;
  }

  SampleSequence candidate(std::move(corrected));
  const ParameterVector theta = estimator(empirical_measure(candidate));
  if (parameter_distance(theta0, theta) < original_error) {
    InterventionResult result;
    result.corrected = std::move(candidate);
    result.theta_tilde = theta;
    result.cost_used = spent;
    result.num_changes = detail::count_changes(original, result.corrected);
    result.fell_back = false;
    return result;
  }
  return detail::keep_original(original, theta_hat);
}

// One correction at a time: re-assemble and re-solve on the current sequence
// with the remaining budget, apply the single feasible change with the best
// predicted error under the Taylor model, and repeat until the budget or the
// predicted improvement runs out. The budget plays the role of the horizon.
inline InterventionResult receding_horizon_policy(const SampleSequence& original,
                                                  const CostFunctionSpec& cost,
                                                  const Estimator& estimator,
                                                  const ParameterVector& theta0,
                                                  const TeacherConfig& config,
                                                  const SolverOptions& solver_options = {},
                                                  double gradient_epsilon = 1e-5) {
  const ParameterVector theta_hat = estimator(empirical_measure(original));
  const double original_error = parameter_distance(theta0, theta_hat);

  SampleSequence current = original;
  double remaining = config.budget;
  constexpr int kMaxSteps = 1000;

  try {
    for (int step = 0; step < kMaxSteps; ++step) {
      const StateSpace targets = StateSpace::from_sequence(current);
      const TransportProblem problem =
          assemble_problem(current, targets, estimator, theta0, cost, remaining,
                           gradient_epsilon);
      solve_alpha(problem, solver_options);  // infeasibility propagates as policy failure

      const std::size_t n = problem.rows(), m = problem.cols();
      const double nm = static_cast<double>(n * m);
      const double inv_n = 1.0 / static_cast<double>(current.size());

      // Taylor prediction at the identity plan of the current sequence.
      const std::vector<double> identity = initial_feasible_plan(problem);
      const ParameterVector base_prediction = taylor_estimate(problem, identity);
      const double base_error = parameter_distance(theta0, base_prediction);

      // A one-sample move from state a to target j shifts alpha mass
      // 1/(N q_a r_a) off the diagonal and 1/(N q_a r_j) onto column j.
      bool found = false;
      double best_error = base_error;
      double best_cost = 0.0;
      std::size_t best_sample = 0, best_target = 0;
      for (std::size_t i = 0; i < current.size(); ++i) {
        const std::size_t a = *problem.source.index_of(current[i]);
        const std::size_t a_col = *problem.targets.index_of(current[i]);
        const double q_a = problem.q.weight(a);
        for (std::size_t j = 0; j < m; ++j) {
          if (j == a_col) continue;
          const double change_cost = problem.cost(a, j);
          if (change_cost > remaining) continue;
          const double delta_on = inv_n / (q_a * problem.r.weight(j));
          const double delta_off = inv_n / (q_a * problem.r.weight(a_col));
          double error_sq = 0.0;
          for (std::size_t coord = 0; coord < theta0.dim(); ++coord) {
            const double predicted = base_prediction.values[coord] +
                                     problem.gradient.at(coord, j) / nm * delta_on -
                                     problem.gradient.at(coord, a_col) / nm * delta_off;
            const double residual = theta0.values[coord] - predicted;
            error_sq += residual * residual;
          }
          const double predicted_error = std::sqrt(error_sq);
          const bool better =
              predicted_error < best_error ||
              (predicted_error == best_error && found &&
               std::tie(change_cost, i, j) < std::tie(best_cost, best_sample, best_target));
          if (better) {
            found = true;
            best_error = predicted_error;
            best_cost = change_cost;
            best_sample = i;
            best_target = j;
          }
        }
      }
      if (!found || !(best_error < base_error)) break;

      std::vector<Sample> next = current.samples();
      next[best_sample] = problem.targets.state(best_target);
      current = SampleSequence(std::move(next));
      remaining -= best_cost;
    }
  } catch (const InfeasibleProblem&) {
    return detail::keep_original(original, theta_hat);
  }

  const double net_cost = sequence_cost(original, current, cost);
  if (net_cost > config.budget) {  // possible only for non-subadditive tabulated costs
    return detail::keep_original(original, theta_hat);
  }
  const ParameterVector theta = estimator(empirical_measure(current));
  if (parameter_distance(theta0, theta) < original_error) {
    InterventionResult result;
    result.corrected = std::move(current);
    result.theta_tilde = theta;
    result.cost_used = net_cost;
    result.num_changes = detail::count_changes(original, result.corrected);
    result.fell_back = false;
    return result;
  }
  return detail::keep_original(original, theta_hat);
}

// Exhaustive search over all target assignments within the budget. Guarded
// to m^N <= 10^6; ties are broken toward the lexicographically smallest
// assignment by enumeration order.
inline InterventionResult oracle_search(const SampleSequence& original, const StateSpace& targets,
                                        double budget_B, const CostFunctionSpec& cost,
                                        const Estimator& estimator,
                                        const ParameterVector& theta0) {
  const std::size_t n_samples = original.size();
  const std::size_t m = targets.size();
  double combinations = 1.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    combinations *= static_cast<double>(m);
    if (combinations > 1e6) {
      throw std::invalid_argument("oracle_search: instance too large (m^N > 1e6)");
    }
  }

  std::vector<std::size_t> assignment(n_samples, 0);
  std::vector<Sample> candidate(n_samples);
  bool any_feasible = false;
  int feasible_count = 0;
  double best_error = std::numeric_limits<double>::infinity();
  InterventionResult best;

  while (true) {
    double assignment_cost = 0.0;
    bool within_budget = true;
    for (std::size_t i = 0; i < n_samples; ++i) {
      candidate[i] = targets.state(assignment[i]);
      assignment_cost += evaluate_cost(cost, original[i], candidate[i]);
      if (assignment_cost > budget_B) {
        within_budget = false;
        break;
      }
    }
    if (within_budget) {
      any_feasible = true;
      ++feasible_count;
      SampleSequence corrected{std::vector<Sample>(candidate)};
      const ParameterVector theta = estimator(empirical_measure(corrected));
      const double error = parameter_distance(theta0, theta);
      if (error < best_error) {
        best_error = error;
        best.corrected = std::move(corrected);
        best.theta_tilde = theta;
        best.cost_used = assignment_cost;
      }
    }

    // odometer advance in lexicographic order
    std::size_t pos = n_samples;
    bool exhausted = false;
    while (true) {
      if (pos == 0) {
        exhausted = true;
        break;
      }
      --pos;
      if (++assignment[pos] < m) break;
      assignment[pos] = 0;
    }
    if (exhausted) break;
  }

  if (!any_feasible) {
    throw InfeasibleProblem("oracle_search: no assignment satisfies the budget");
  }
  best.num_changes = detail::count_changes(original, best.corrected);
  best.proposals_feasible = feasible_count;
  best.fell_back = best.corrected == original;
  return best;
}

}  // namespace cot
