// Discretized teacher problem: minimize ||theta0 - J_TAD(alpha)||^2 over the
// transport weights alpha, subject to the discrete budget and marginal
// constraints, and recover the per-sample correction pmf from the solved
// plan.
//
// The model is the importance-sampled Taylor discretization
//
//   J_TAD(alpha) = c0 + sum_ij G_ij alpha_ij,
//   c0           = J(p_hat) - sum_i p_hat(x_i) g(x_i),
//   G_ij         = g(s~_j) / (n m),
//
// with constraints alpha >= 0, (1/m) sum_j alpha_ij = row_target_i for all i,
// and (1/(n m)) sum_ij c_ij alpha_ij <= B/N. The constant term uses the exact
// expectation of the gradient under p_hat; it coincides with the equal-weight
// form when the samples are all distinct, the operative case for continuous
// data.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "cot/estimators.hpp"
#include "cot/measure.hpp"

namespace cot {

struct TransportProblem {
  EmpiricalMeasure p_hat;   // empirical measure of the observed sequence
  StateSpace source;        // S, n states
  StateSpace targets;       // S~, m states
  EmpiricalMeasure q;       // proposal on S
  EmpiricalMeasure r;       // proposal on S~
  ParameterVector theta0;   // the teacher's true parameter
  ParameterVector c0;       // constant term of the Taylor model
  std::vector<std::vector<double>> G;  // per coordinate, n*m row-major
  CostMatrix cost;
  std::vector<double> row_targets;  // d p_hat(x_i) / d q(x_i), length n
  double budget_rhs = 0.0;          // B / N
  GradientField gradient;           // g over the target states

  std::size_t rows() const { return source.size(); }
  std::size_t cols() const { return targets.size(); }
};

struct SolverOptions {
  int max_iterations = 20000;
  double relative_objective_tol = 1e-10;
  double displacement_tol = 1e-10;
  int projection_max_iterations = 200;   // bisection steps on the budget multiplier
  double projection_tol = 1e-15;         // relative multiplier-interval width
  bool record_trace = false;
};

// Solved decision variable alpha_ij = dp(x_i, s~_j) / (dq(x_i) dr(s~_j))
// with feasibility diagnostics.
struct TransportPlanAlpha {
  std::vector<double> alpha;  // n*m row-major
  std::size_t rows = 0;
  std::size_t cols = 0;
  double objective_value = 0.0;
  double marginal_residual = 0.0;
  double budget_slack = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // filled when SolverOptions::record_trace

  double operator()(std::size_t i, std::size_t j) const { return alpha[i * cols + j]; }
};

namespace detail {

// Euclidean projection onto the scaled simplex {v >= 0, sum v = total}.
inline void project_scaled_simplex(double* v, std::size_t m, double total,
                                   std::vector<double>& scratch) {
  if (total <= 0.0) {
    std::fill(v, v + m, 0.0);
    return;
  }
  scratch.assign(v, v + m);
  std::sort(scratch.begin(), scratch.end(), std::greater<double>());
  double cumulative = 0.0;
  double tau = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    cumulative += scratch[k];
    const double candidate = (cumulative - total) / static_cast<double>(k + 1);
    if (scratch[k] - candidate > 0.0) tau = candidate;
  }
  for (std::size_t k = 0; k < m; ++k) {
    v[k] = std::max(v[k] - tau, 0.0);
  }
}

// Projection onto the product of per-row scaled simplices
// {alpha_i >= 0, sum_j alpha_ij = m * row_target_i}.
inline void project_row_simplices(std::vector<double>& alpha, std::size_t n, std::size_t m,
                                  const std::vector<double>& row_targets,
                                  std::vector<double>& scratch) {
  for (std::size_t i = 0; i < n; ++i) {
    project_scaled_simplex(alpha.data() + i * m, m, static_cast<double>(m) * row_targets[i],
                           scratch);
  }
}

// Euclidean projection onto {alpha in product of row simplices, <c, alpha>
// <= bound}, through the Lagrangian dual of the budget constraint: for a
// multiplier lambda >= 0 the inner minimizer is P_rows(v - lambda c), and
// phi(lambda) = <c, P_rows(v - lambda c)> is continuous and non-increasing,
// so the complementary-slackness multiplier is found by bisection. Every
// returned point lies in the row simplices to machine precision and
// satisfies the budget exactly (the feasible bisection endpoint is kept).
//
// Plain Dykstra alternation between the same two pieces was tried first and
// needs an unbounded number of cycles to unwind the far-overshot gradient
// steps that a 1/L step produces on nearly-flat objectives.
inline void project_feasible(std::vector<double>& alpha, std::size_t n, std::size_t m,
                             const std::vector<double>& row_targets, const std::vector<double>& c,
                             double c_norm_sq, double bound, const SolverOptions& options,
                             std::vector<double>& scratch, double* lambda_hint = nullptr) {
  if (c_norm_sq <= 0.0) {  // all-zero costs: the halfspace is vacuous
    project_row_simplices(alpha, n, m, row_targets, scratch);
    return;
  }
  const std::vector<double> v = alpha;
  std::vector<double> trial(v.size());
  auto transported_at = [&](double lambda, std::vector<double>& out) {
    out = v;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] -= lambda * c[k];
    project_row_simplices(out, n, m, row_targets, scratch);
    double dot = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) dot += c[k] * out[k];
    return dot;
  };

  if (transported_at(0.0, alpha) <= bound) {
    if (lambda_hint) *lambda_hint = 0.0;
    return;
  }

  // Bracket the multiplier, starting from the previous solve iteration's
  // value when available (it drifts slowly between gradient steps).
  double lo = 0.0, hi = lambda_hint && *lambda_hint > 0.0 ? *lambda_hint : 1.0;
  double phi_hi = transported_at(hi, trial);
  int widenings = 0;
  while (phi_hi > bound && widenings++ < 300) {
    lo = hi;
    hi *= 2.0;
    phi_hi = transported_at(hi, trial);
  }
  alpha = trial;  // feasible endpoint

  for (int iter = 0; iter < options.projection_max_iterations; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double phi = transported_at(mid, trial);
    if (phi <= bound) {
      hi = mid;
      alpha = trial;
    } else {
      lo = mid;
    }
    if (hi - lo <= options.projection_tol * std::max(hi, 1.0)) break;
  }
  if (lambda_hint) *lambda_hint = hi;
}

inline double model_objective(const TransportProblem& problem, const std::vector<double>& alpha) {
  double acc = 0.0;
  for (std::size_t coord = 0; coord < problem.theta0.dim(); ++coord) {
    double predicted = problem.c0.values[coord];
    const std::vector<double>& g_row = problem.G[coord];
    for (std::size_t k = 0; k < alpha.size(); ++k) predicted += g_row[k] * alpha[k];
    const double residual = problem.theta0.values[coord] - predicted;
    acc += residual * residual;
  }
  return acc;
}

inline void model_gradient(const TransportProblem& problem, const std::vector<double>& alpha,
                           std::vector<double>& grad) {
  grad.assign(alpha.size(), 0.0);
  for (std::size_t coord = 0; coord < problem.theta0.dim(); ++coord) {
    double predicted = problem.c0.values[coord];
    const std::vector<double>& g_row = problem.G[coord];
    for (std::size_t k = 0; k < alpha.size(); ++k) predicted += g_row[k] * alpha[k];
    const double residual = problem.theta0.values[coord] - predicted;
    for (std::size_t k = 0; k < alpha.size(); ++k) grad[k] += -2.0 * residual * g_row[k];
  }
}

}  // namespace detail

// The zero-cost identity-like plan: each row's full mass m*row_target_i on
// its first zero-cost column (the diagonal when S~ = S). Throws
// InfeasibleProblem when a row has no zero-cost column.
inline std::vector<double> initial_feasible_plan(const TransportProblem& problem) {
  const std::size_t n = problem.rows(), m = problem.cols();
  std::vector<double> alpha(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    bool placed = false;
    for (std::size_t j = 0; j < m; ++j) {
      if (problem.cost(i, j) == 0.0) {
        alpha[i * m + j] = static_cast<double>(m) * problem.row_targets[i];
        placed = true;
        break;
      }
    }
    if (!placed) {
      throw InfeasibleProblem(
          "transport problem infeasible: a source state has no zero-cost target");
    }
  }
  return alpha;
}

inline void validate_problem(const TransportProblem& problem) {
  const std::size_t n = problem.rows(), m = problem.cols();
  if (n == 0 || m == 0) throw std::invalid_argument("TransportProblem: empty state space");
  if (problem.row_targets.size() != n) {
    throw std::invalid_argument("TransportProblem: row_targets must have length n");
  }
  if (!(problem.budget_rhs >= 0.0)) {
    throw std::invalid_argument("TransportProblem: budget_rhs must be nonnegative");
  }
  if (problem.G.size() != problem.theta0.dim() || problem.c0.dim() != problem.theta0.dim()) {
    throw std::invalid_argument("TransportProblem: c0/G/theta0 dimension mismatch");
  }
  for (const auto& g_row : problem.G) {
    if (g_row.size() != n * m) {
      throw std::invalid_argument("TransportProblem: G must be n*m per coordinate");
    }
    for (double g : g_row) {
      if (!std::isfinite(g)) throw std::invalid_argument("TransportProblem: G must be finite");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (problem.p_hat.weight(i) > 0.0 && !(problem.row_targets[i] > 0.0)) {
      throw std::invalid_argument("TransportProblem: row_targets must be positive on the support");
    }
  }
}

// Projected gradient descent with exact feasible-set projections.
// Steps that fail to descend (possible only through projection inexactness)
// are retried with a halved step, so the objective trace is non-increasing.
inline TransportPlanAlpha solve_alpha(const TransportProblem& problem,
                                      const SolverOptions& options = {}) {
  validate_problem(problem);
  const std::size_t n = problem.rows(), m = problem.cols();
  const std::size_t size = n * m;

  // With budget_rhs == 0 every feasible plan is supported on zero-cost
  // entries only; restrict the variables to that mask and drop the halfspace.
  const bool zero_budget = problem.budget_rhs == 0.0;
  std::vector<char> active(size, 1);
  if (zero_budget) {
    for (std::size_t k = 0; k < size; ++k) active[k] = problem.cost.entries()[k] == 0.0 ? 1 : 0;
  }

  std::vector<double> alpha = initial_feasible_plan(problem);

  const std::vector<double>& cost_entries = problem.cost.entries();
  const double budget_bound =
      static_cast<double>(n) * static_cast<double>(m) * problem.budget_rhs;
  double cost_norm_sq = 0.0;
  for (double c : cost_entries) cost_norm_sq += c * c;

  double lipschitz = 0.0;
  for (const auto& g_row : problem.G) {
    for (double g : g_row) lipschitz += 2.0 * g * g;
  }

  std::vector<double> scratch, grad, candidate;
  // Per-row projection restricted to the zero-cost mask (zero-budget path).
  auto project_masked_rows = [&](std::vector<double>& a) {
    std::vector<double> packed;
    for (std::size_t i = 0; i < n; ++i) {
      packed.clear();
      for (std::size_t j = 0; j < m; ++j) {
        if (active[i * m + j]) packed.push_back(a[i * m + j]);
      }
      detail::project_scaled_simplex(packed.data(), packed.size(),
                                     static_cast<double>(m) * problem.row_targets[i], scratch);
      std::size_t cursor = 0;
      for (std::size_t j = 0; j < m; ++j) {
        a[i * m + j] = active[i * m + j] ? packed[cursor++] : 0.0;
      }
    }
  };

  double lambda_hint = 0.0;
  auto project = [&](std::vector<double>& a) {
    if (zero_budget) {
      project_masked_rows(a);
    } else {
      detail::project_feasible(a, n, m, problem.row_targets, cost_entries, cost_norm_sq,
                               budget_bound, options, scratch, &lambda_hint);
    }
  };

  TransportPlanAlpha plan;
  plan.rows = n;
  plan.cols = m;

  double objective = detail::model_objective(problem, alpha);
  if (options.record_trace) plan.objective_trace.push_back(objective);

  bool converged = lipschitz == 0.0;  // constant objective: nothing to do
  int iterations = 0;
  const double base_step = lipschitz > 0.0 ? 1.0 / lipschitz : 0.0;
  double step = base_step;

  // Squared residuals below this are numerically zero; grinding further only
  // burns projection passes.
  constexpr double kObjectiveFloor = 1e-18;
  if (objective < kObjectiveFloor) converged = true;

  // Windowed stagnation check: per-iteration progress can hover just above
  // the relative tolerance while the iterate rattles along an active face.
  constexpr int kWindow = 32;
  double window_objective = objective;

  while (!converged && iterations < options.max_iterations) {
    ++iterations;
    detail::model_gradient(problem, alpha, grad);
    bool accepted = false;
    bool backed_off = false;
    double candidate_objective = objective;
    while (!accepted) {
      candidate = alpha;
      for (std::size_t k = 0; k < size; ++k) candidate[k] -= step * grad[k];
      project(candidate);
      candidate_objective = detail::model_objective(problem, candidate);
      if (candidate_objective <= objective) {
        accepted = true;
      } else {
        backed_off = true;
        step *= 0.5;
        if (step < base_step * 1e-12) {  // projection noise dominates
          candidate = alpha;
          candidate_objective = objective;
          accepted = true;
          converged = true;
        }
      }
    }
    // 1/L guarantees descent with the exact projection; growing the step when
    // it keeps descending just shortens the crawl along active faces. The
    // monotone acceptance test above is what protects correctness.
    if (!backed_off) step = std::min(step * 2.0, base_step * 1e6);

    double displacement = 0.0;
    for (std::size_t k = 0; k < size; ++k) {
      displacement = std::max(displacement, std::abs(candidate[k] - alpha[k]));
    }
    const double drop = objective - candidate_objective;
    alpha.swap(candidate);
    objective = candidate_objective;
    if (options.record_trace) plan.objective_trace.push_back(objective);

    const double relative_drop = drop / std::max(objective + drop, 1e-300);
    if (objective < kObjectiveFloor || relative_drop < options.relative_objective_tol ||
        displacement < options.displacement_tol) {
      converged = true;
    }
    if (!converged && iterations % kWindow == 0) {
      if (window_objective - objective <= 1e-16 + 1e-6 * window_objective) converged = true;
      window_objective = objective;
    }
  }

  plan.alpha = std::move(alpha);
  plan.objective_value = objective;
  plan.iterations = iterations;
  plan.converged = converged;

  double marginal_residual = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row_mean = 0.0;
    for (std::size_t j = 0; j < m; ++j) row_mean += plan.alpha[i * m + j];
    row_mean /= static_cast<double>(m);
    marginal_residual = std::max(marginal_residual, std::abs(row_mean - problem.row_targets[i]));
  }
  plan.marginal_residual = marginal_residual;

  double transported_cost = 0.0;
  for (std::size_t k = 0; k < size; ++k) transported_cost += cost_entries[k] * plan.alpha[k];
  plan.budget_slack = problem.budget_rhs - transported_cost / static_cast<double>(n * m);

  return plan;
}

// Taylor-model estimate J_TAD at a given plan.
inline ParameterVector taylor_estimate(const TransportProblem& problem,
                                       const std::vector<double>& alpha) {
  std::vector<double> values(problem.theta0.dim(), 0.0);
  for (std::size_t coord = 0; coord < values.size(); ++coord) {
    double predicted = problem.c0.values[coord];
    const std::vector<double>& g_row = problem.G[coord];
    for (std::size_t k = 0; k < alpha.size(); ++k) predicted += g_row[k] * alpha[k];
    values[coord] = predicted;
  }
  return ParameterVector(std::move(values));
}

// Modified target marginal implied by the plan under the same importance
// discretization: p~(s~_j) = (1/(n m)) sum_i alpha_ij. Sums to 1 whenever the
// marginal constraints hold with row targets averaging to 1.
inline EmpiricalMeasure implied_modified_marginal(const TransportProblem& problem,
                                                  const TransportPlanAlpha& plan) {
  const std::size_t n = plan.rows, m = plan.cols;
  std::vector<double> weights(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) weights[j] += plan.alpha[i * m + j];
  }
  double total = 0.0;
  for (double& w : weights) {
    w = std::max(w, 0.0) / static_cast<double>(n * m);
    total += w;
  }
  if (total <= 0.0) throw DegeneratePlan("implied_modified_marginal: plan carries no mass");
  for (double& w : weights) w /= total;
  return EmpiricalMeasure(problem.targets, std::move(weights));
}

// Assembled dq = dr = p_hat problem over the observed states. The proposal on
// the targets is p_hat restricted to S~ (renormalized) when S~ only contains
// observed values, and uniform otherwise.
inline TransportProblem assemble_problem(const SampleSequence& seq,
                                         const StateSpace& target_states,
                                         const Estimator& estimator,
                                         const ParameterVector& theta0,
                                         const CostFunctionSpec& cost_spec, double budget_B,
                                         double epsilon = 1e-5) {
  if (target_states.size() == 0) {
    throw std::invalid_argument("assemble_problem: target state space must be nonempty");
  }
  if (!(budget_B >= 0.0)) {
    throw std::invalid_argument("assemble_problem: budget must be nonnegative");
  }
  for (std::size_t j = 0; j < target_states.size(); ++j) {
    if (!estimator.state_in_domain(target_states.state(j))) {
      throw std::invalid_argument("assemble_problem: target state outside estimator domain");
    }
  }

  TransportProblem problem;
  problem.p_hat = empirical_measure(seq);
  problem.source = problem.p_hat.support();
  problem.targets = target_states;
  problem.theta0 = theta0;

  const std::size_t n = problem.source.size();
  const std::size_t m = problem.targets.size();

  problem.q = problem.p_hat;
  if (problem.targets == problem.source) {
    problem.r = problem.p_hat;
  } else {
    std::vector<double> r_weights(m, 0.0);
    bool all_observed = true;
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      auto idx = problem.source.index_of(problem.targets.state(j));
      if (!idx) {
        all_observed = false;
        break;
      }
      r_weights[j] = problem.p_hat.weight(*idx);
      total += r_weights[j];
    }
    if (all_observed && total > 0.0) {
      for (double& w : r_weights) w /= total;
    } else {
      r_weights.assign(m, 1.0 / static_cast<double>(m));
    }
    problem.r = EmpiricalMeasure(problem.targets, std::move(r_weights));
  }

  problem.gradient =
      numerical_gradient(estimator, problem.p_hat, problem.targets, epsilon);
  const GradientField source_gradient =
      problem.targets == problem.source
          ? problem.gradient
          : numerical_gradient(estimator, problem.p_hat, problem.source, epsilon);

  const ParameterVector at_p_hat = estimator(problem.p_hat);
  const std::size_t dim = at_p_hat.dim();
  if (theta0.dim() != dim) {
    throw std::invalid_argument("assemble_problem: theta0 dimension must match the estimator");
  }

  std::vector<double> c0(dim, 0.0);
  problem.G.assign(dim, std::vector<double>(n * m, 0.0));
  const double scale = 1.0 / static_cast<double>(n * m);
  for (std::size_t coord = 0; coord < dim; ++coord) {
    double gradient_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      gradient_mean += problem.p_hat.weight(i) * source_gradient.at(coord, i);
    }
    c0[coord] = at_p_hat.values[coord] - gradient_mean;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        problem.G[coord][i * m + j] = problem.gradient.at(coord, j) * scale;
      }
    }
  }
  problem.c0 = ParameterVector(std::move(c0));

  problem.cost = build_cost_matrix(problem.source, problem.targets, cost_spec);
  problem.row_targets.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    problem.row_targets[i] = problem.p_hat.weight(i) / problem.q.weight(i);
  }
  problem.budget_rhs = budget_B / static_cast<double>(seq.size());
  return problem;
}

// Per-sample correction probabilities recovered from the plan via Bayes'
// rule: P[i][j] proportional to alpha_ij r(s~_j). Rows are renormalized to
// sum exactly 1; the worst pre-normalization drift is reported. Rows left
// with no mass map to the identity change when the source state is also a
// target, and are rejected otherwise.
struct ConditionalPmf {
  std::vector<double> rows;  // n*m row-major, each row sums to 1
  std::size_t n = 0;
  std::size_t m = 0;
  double max_row_residual = 0.0;

  double operator()(std::size_t i, std::size_t j) const { return rows[i * m + j]; }
};

inline ConditionalPmf conditional_pmf(const TransportPlanAlpha& plan, const StateSpace& source,
                                      const EmpiricalMeasure& r) {
  if (r.size() != plan.cols) {
    throw std::invalid_argument("conditional_pmf: proposal size must match plan columns");
  }
  if (source.size() != plan.rows) {
    throw std::invalid_argument("conditional_pmf: source size must match plan rows");
  }
  ConditionalPmf pmf;
  pmf.n = plan.rows;
  pmf.m = plan.cols;
  pmf.rows.assign(plan.rows * plan.cols, 0.0);

  for (std::size_t i = 0; i < plan.rows; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < plan.cols; ++j) {
      const double mass = std::max(plan(i, j), 0.0) * r.weight(j);
      pmf.rows[i * plan.cols + j] = mass;
      row_sum += mass;
    }
    if (row_sum > 0.0) {
      pmf.max_row_residual = std::max(pmf.max_row_residual, std::abs(row_sum - 1.0));
      for (std::size_t j = 0; j < plan.cols; ++j) pmf.rows[i * plan.cols + j] /= row_sum;
    } else {
      auto identity = r.support().index_of(source.state(i));
      if (!identity) {
        throw DegeneratePlan("conditional_pmf: zero-mass row for a state outside the targets");
      }
      pmf.rows[i * plan.cols + *identity] = 1.0;
    }
  }
  return pmf;
}

}  // namespace cot
