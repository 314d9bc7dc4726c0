#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "cot/transport.hpp"
#include "grid_oracle.hpp"

using namespace cot;

namespace {

SampleSequence scalars(std::initializer_list<double> values) {
  return SampleSequence::from_scalars(std::vector<double>(values));
}

// Random instance with S~ = S assembled through the real pipeline.
TransportProblem random_instance(std::mt19937_64& rng, int n_states, bool use_variance,
                                 double budget_scale) {
  std::normal_distribution<double> state(0.0, 2.0);
  std::uniform_int_distribution<int> extra(0, 2);
  std::uniform_real_distribution<double> offset(-1.0, 1.0);

  std::vector<double> values;
  for (int i = 0; i < n_states; ++i) {
    double v = state(rng);
    while (std::find(values.begin(), values.end(), v) != values.end()) v = state(rng);
    values.push_back(v);
  }
  std::vector<double> sequence = values;
  const int duplicates = extra(rng);
  for (int i = 0; i < duplicates; ++i) sequence.push_back(values[i % values.size()]);

  const SampleSequence seq = SampleSequence::from_scalars(sequence);
  const Estimator estimator = use_variance ? make_variance_estimator() : make_mean_estimator();
  const double at_hat = estimator(empirical_measure(seq)).scalar();
  const ParameterVector theta0(at_hat + offset(rng));
  const double budget = budget_scale * static_cast<double>(seq.size());
  return assemble_problem(seq, StateSpace::from_sequence(seq), estimator, theta0,
                          IndicatorCost{}, budget);
}

double plan_cost_average(const TransportProblem& problem, const TransportPlanAlpha& plan) {
  double total = 0.0;
  for (std::size_t k = 0; k < plan.alpha.size(); ++k) {
    total += problem.cost.entries()[k] * plan.alpha[k];
  }
  return total / static_cast<double>(plan.rows * plan.cols);
}

}  // namespace

TEST_CASE("assemble_problem on the two-state mean instance") {
  const auto seq = scalars({0.0, 1.0});
  const auto problem = assemble_problem(seq, StateSpace::from_sequence(seq),
                                        make_mean_estimator(), ParameterVector(0.75),
                                        IndicatorCost{}, 0.5);
  REQUIRE(problem.rows() == 2);
  REQUIRE(problem.cols() == 2);
  CHECK(problem.gradient.at(0, 0) == Catch::Approx(-0.5).margin(1e-9));
  CHECK(problem.gradient.at(0, 1) == Catch::Approx(0.5).margin(1e-9));
  CHECK(problem.c0.scalar() == Catch::Approx(0.5).margin(1e-9));
  CHECK(problem.row_targets == std::vector<double>{1.0, 1.0});
  CHECK(problem.budget_rhs == Catch::Approx(0.25));
  // G_ij = g(s~_j)/(n m), constant down each column
  CHECK(problem.G[0][0] == Catch::Approx(-0.125).margin(1e-9));
  CHECK(problem.G[0][1] == Catch::Approx(0.125).margin(1e-9));
  CHECK(problem.G[0][2] == Catch::Approx(-0.125).margin(1e-9));
}

TEST_CASE("assemble_problem with zero budget and distinct samples") {
  const auto seq = scalars({0.1, 0.9, 1.7, 2.4, 3.3, 4.0, 5.5, 6.1, 7.7, 8.2});
  const auto problem = assemble_problem(seq, StateSpace::from_sequence(seq),
                                        make_mean_estimator(), ParameterVector(1.0),
                                        IndicatorCost{}, 0.0);
  CHECK(problem.budget_rhs == 0.0);
  CHECK(problem.rows() == 10);
  CHECK(problem.cols() == 10);
  for (double t : problem.row_targets) CHECK(t == 1.0);
}

TEST_CASE("assemble_problem rejects targets outside the estimator domain") {
  const auto seq = scalars({1.0, 2.0});
  CHECK_THROWS_AS(assemble_problem(seq, StateSpace(std::vector<Sample>{{-1.0}}), make_weibull_scale_estimator(8.0),
                                   ParameterVector(2.0), IndicatorCost{}, 1.0),
                  std::invalid_argument);
}

TEST_CASE("zero budget forces the diagonal plan") {
  const auto seq = scalars({0.5, 1.5, 2.5});
  const auto problem = assemble_problem(seq, StateSpace::from_sequence(seq),
                                        make_variance_estimator(), ParameterVector(3.0),
                                        IndicatorCost{}, 0.0);
  const auto plan = solve_alpha(problem);
  REQUIRE(plan.rows == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(plan(i, j) == (i == j ? 3.0 : 0.0));
    }
  }
  const auto j_tad = taylor_estimate(problem, plan.alpha);
  const double at_hat = make_variance_estimator()(problem.p_hat).scalar();
  CHECK(j_tad.scalar() == Catch::Approx(at_hat).margin(1e-12));

  const auto pmf = conditional_pmf(plan, problem.source, problem.r);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(pmf(i, j) == (i == j ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("already-optimal target keeps the objective at zero") {
  const auto seq = scalars({0.0, 1.0, 2.0, 3.0});
  const double at_hat = make_variance_estimator()(empirical_measure(seq)).scalar();
  const auto problem = assemble_problem(seq, StateSpace::from_sequence(seq),
                                        make_variance_estimator(), ParameterVector(at_hat),
                                        IndicatorCost{}, 2.0);
  const auto plan = solve_alpha(problem);
  CHECK(plan.objective_value <= 1e-10);
  CHECK(plan.converged);
}

TEST_CASE("two-state mean instance agrees with the dense grid oracle") {
  const auto seq = scalars({0.0, 1.0});
  const auto problem = assemble_problem(seq, StateSpace::from_sequence(seq),
                                        make_mean_estimator(), ParameterVector(0.75),
                                        IndicatorCost{}, 0.5);  // B/N = 0.25
  const auto plan = solve_alpha(problem);
  const auto oracle = cot_test::dense_grid_objective(problem, 1e-3);
  REQUIRE(std::isfinite(oracle.objective));
  CHECK(std::abs(plan.objective_value - oracle.objective) < 1e-4);
  // the target 0.75 is reachable exactly on this instance
  CHECK(plan.objective_value < 1e-9);

  SECTION("conditional pmf rows match the hand recomputation") {
    const auto pmf = conditional_pmf(plan, problem.source, problem.r);
    for (std::size_t i = 0; i < 2; ++i) {
      double row_sum = 0.0;
      for (std::size_t j = 0; j < 2; ++j) row_sum += plan(i, j) * problem.r.weight(j);
      REQUIRE(row_sum > 0.0);
      for (std::size_t j = 0; j < 2; ++j) {
        CHECK(pmf(i, j) ==
              Catch::Approx(plan(i, j) * problem.r.weight(j) / row_sum).margin(1e-9));
      }
    }
  }
}

TEST_CASE("returned plans satisfy the constraint families") {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> n_states(2, 5);
  std::uniform_real_distribution<double> budget_scale(0.0, 0.6);
  std::bernoulli_distribution use_variance(0.5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto problem =
        random_instance(rng, n_states(rng), use_variance(rng), budget_scale(rng));
    const auto plan = solve_alpha(problem);
    for (double a : plan.alpha) CHECK(a >= -1e-12);
    CHECK(plan.marginal_residual < 1e-6);
    CHECK(plan.budget_slack >= -1e-8);
    CHECK(plan_cost_average(problem, plan) <=
          problem.budget_rhs + 1e-8);
  }
}

TEST_CASE("objective trace is non-increasing") {
  std::mt19937_64 rng(211);
  for (int trial = 0; trial < 10; ++trial) {
    const auto problem = random_instance(rng, 4, true, 0.3);
    SolverOptions options;
    options.record_trace = true;
    const auto plan = solve_alpha(problem, options);
    REQUIRE(plan.objective_trace.size() >= 1);
    for (std::size_t k = 1; k < plan.objective_trace.size(); ++k) {
      CHECK(plan.objective_trace[k] <= plan.objective_trace[k - 1] + 1e-15);
    }
    CHECK(plan.objective_value ==
          Catch::Approx(plan.objective_trace.back()).margin(1e-15));
  }
}

TEST_CASE("optimal objective is non-increasing in the budget") {
  const auto seq = scalars({0.2, 1.1, 2.7, 3.9, 5.0});
  double previous = std::numeric_limits<double>::infinity();
  for (double budget : {0.0, 1.0, 2.0, 4.0}) {
    const auto problem = assemble_problem(seq, StateSpace::from_sequence(seq),
                                          make_variance_estimator(), ParameterVector(6.5),
                                          IndicatorCost{}, budget);
    const auto plan = solve_alpha(problem);
    CHECK(plan.objective_value <= previous + 1e-9);
    previous = plan.objective_value;
  }
}

TEST_CASE("Taylor model is exact for the linear mean estimator") {
  std::mt19937_64 rng(307);
  const auto mean = make_mean_estimator();
  for (int trial = 0; trial < 20; ++trial) {
    const auto problem = random_instance(rng, 4, false, 0.4);
    // random feasible plan: random nonnegative entries projected feasible
    std::uniform_real_distribution<double> raw(0.0, 2.0);
    std::vector<double> alpha(problem.rows() * problem.cols());
    for (double& a : alpha) a = raw(rng);
    std::vector<double> scratch;
    double cost_norm_sq = 0.0;
    for (double c : problem.cost.entries()) cost_norm_sq += c * c;
    cot::detail::project_feasible(
        alpha, problem.rows(), problem.cols(), problem.row_targets, problem.cost.entries(),
        cost_norm_sq,
        static_cast<double>(problem.rows() * problem.cols()) * problem.budget_rhs,
        SolverOptions{}, scratch);

    TransportPlanAlpha plan;
    plan.rows = problem.rows();
    plan.cols = problem.cols();
    plan.alpha = alpha;
    const double taylor = taylor_estimate(problem, alpha).scalar();
    const double exact = mean(implied_modified_marginal(problem, plan)).scalar();
    CHECK(taylor == Catch::Approx(exact).margin(1e-10));
  }
}

TEST_CASE("infeasible assemblies are reported") {
  // tabulated cost with no zero-cost entry in the second row
  const StateSpace states({{0.0}, {1.0}});
  TabulatedCost tab{states, states, {0.0, 1.0, 2.0, 3.0}};
  const auto seq = scalars({0.0, 1.0});
  const auto problem = assemble_problem(seq, states, make_mean_estimator(),
                                        ParameterVector(0.5), CostFunctionSpec(tab), 1.0);
  CHECK_THROWS_AS(solve_alpha(problem), InfeasibleProblem);
}

TEST_CASE("conditional pmf handles degenerate rows") {
  TransportPlanAlpha plan;
  plan.rows = 2;
  plan.cols = 2;
  plan.alpha = {2.0, 0.0, 0.0, 0.0};  // second row carries no mass

  const StateSpace source({{0.0}, {1.0}});
  const EmpiricalMeasure r(source, {0.5, 0.5});
  const auto pmf = conditional_pmf(plan, source, r);
  CHECK(pmf(0, 0) == 1.0);
  CHECK(pmf(1, 1) == 1.0);  // identity fallback

  const StateSpace outside({{0.0}, {7.0}});
  CHECK_THROWS_AS(conditional_pmf(plan, outside, r), DegeneratePlan);
}

TEST_CASE("conditional pmf of the all-ones plan under a uniform proposal is uniform") {
  TransportPlanAlpha plan;
  plan.rows = 2;
  plan.cols = 4;
  plan.alpha.assign(8, 1.0);
  const StateSpace source({{0.0}, {1.0}});
  const StateSpace targets({{0.0}, {1.0}, {2.0}, {3.0}});
  const EmpiricalMeasure r(targets, {0.25, 0.25, 0.25, 0.25});
  const auto pmf = conditional_pmf(plan, source, r);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(pmf(i, j) == Catch::Approx(0.25).margin(1e-15));
    }
  }
}

TEST_CASE("simplex projection is a Euclidean projection") {
  std::mt19937_64 rng(733);
  std::normal_distribution<double> value(0.0, 2.0);
  std::uniform_real_distribution<double> total_dist(0.5, 4.0);
  std::vector<double> scratch;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(6);
    for (double& x : v) x = value(rng);
    const double total = total_dist(rng);
    std::vector<double> projected = v;
    cot::detail::project_scaled_simplex(projected.data(), projected.size(), total, scratch);

    double sum = 0.0;
    for (double x : projected) {
      CHECK(x >= 0.0);
      sum += x;
    }
    CHECK(sum == Catch::Approx(total).margin(1e-10));

    // KKT characterization: x = max(v - tau, 0) for a single shift tau
    double tau = 0.0;
    int positives = 0;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (projected[k] > 0.0) {
        tau += v[k] - projected[k];
        ++positives;
      }
    }
    REQUIRE(positives > 0);
    tau /= positives;
    for (std::size_t k = 0; k < v.size(); ++k) {
      CHECK(projected[k] == Catch::Approx(std::max(v[k] - tau, 0.0)).margin(1e-9));
    }
  }
}

TEST_CASE("feasible-set projection lands in the feasible set") {
  std::mt19937_64 rng(997);
  for (int trial = 0; trial < 20; ++trial) {
    const auto problem = random_instance(rng, 3, true, 0.3);
    const std::size_t n = problem.rows(), m = problem.cols();
    std::uniform_real_distribution<double> raw(-1.0, 3.0);
    std::vector<double> alpha(n * m);
    for (double& a : alpha) a = raw(rng);

    std::vector<double> scratch;
    double cost_norm_sq = 0.0;
    for (double c : problem.cost.entries()) cost_norm_sq += c * c;
    const double bound = static_cast<double>(n * m) * problem.budget_rhs;
    cot::detail::project_feasible(alpha, n, m, problem.row_targets, problem.cost.entries(),
                                  cost_norm_sq, bound, SolverOptions{}, scratch);

    for (double a : alpha) CHECK(a >= 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < m; ++j) row += alpha[i * m + j];
      CHECK(row == Catch::Approx(static_cast<double>(m) * problem.row_targets[i]).margin(1e-9));
    }
    double transported = 0.0;
    for (std::size_t k = 0; k < alpha.size(); ++k) {
      transported += problem.cost.entries()[k] * alpha[k];
    }
    CHECK(transported <= bound + 1e-8);
  }
}
