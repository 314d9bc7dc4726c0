#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "cot/measure.hpp"

using namespace cot;

namespace {

SampleSequence scalars(std::initializer_list<double> values) {
  return SampleSequence::from_scalars(std::vector<double>(values));
}

}  // namespace

TEST_CASE("empirical_measure counts duplicates in first-occurrence order") {
  const auto m = empirical_measure(scalars({1.0, 1.0, 2.0}));
  REQUIRE(m.size() == 2);
  CHECK(m.support().state(0)[0] == 1.0);
  CHECK(m.support().state(1)[0] == 2.0);
  CHECK(m.weight(0) == Catch::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(m.weight(1) == Catch::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("empirical_measure of distinct samples is uniform") {
  const auto m = empirical_measure(scalars({0.3, -1.2, 4.0, 7.5, 2.25}));
  REQUIRE(m.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(m.weight(i) == 0.2);
}

TEST_CASE("empirical_measure of a singleton is a point mass") {
  const auto m = empirical_measure(scalars({5.0}));
  REQUIRE(m.size() == 1);
  CHECK(m.weight(0) == 1.0);
}

TEST_CASE("empty sequences are rejected") {
  CHECK_THROWS_AS(SampleSequence(std::vector<Sample>{}), std::invalid_argument);
  CHECK_THROWS_AS(SampleSequence::from_scalars({}), std::invalid_argument);
}

TEST_CASE("empirical weights sum to one and are multiples of 1/N") {
  std::mt19937_64 rng(71);
  std::uniform_int_distribution<int> length(1, 40);
  std::uniform_int_distribution<int> value(0, 5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> values;
    const int n = length(rng);
    for (int i = 0; i < n; ++i) values.push_back(static_cast<double>(value(rng)));
    const auto m = empirical_measure(SampleSequence::from_scalars(values));
    double total = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      total += m.weight(i);
      const double multiple = m.weight(i) * n;
      CHECK(std::abs(multiple - std::round(multiple)) < 1e-9);
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("state deduplication is bit-level") {
  // 0.1 + 0.2 != 0.3 in binary; both must survive as separate states.
  const double a = 0.1 + 0.2;
  const double b = 0.3;
  REQUIRE(a != b);
  const auto space = StateSpace::from_sequence(scalars({a, b, a}));
  CHECK(space.size() == 2);
  CHECK(space.index_of({a}).value() == 0);
  CHECK(space.index_of({b}).value() == 1);
  CHECK_FALSE(space.index_of({0.7}).has_value());
}

TEST_CASE("StateSpace rejects duplicates and mixed dimensions") {
  CHECK_THROWS_AS(StateSpace({{1.0}, {1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(StateSpace({{1.0}, {1.0, 2.0}}), std::invalid_argument);
}

TEST_CASE("cost matrix families") {
  const auto states = StateSpace({{1.0}, {1.2}, {3.0}});

  SECTION("indicator has zero diagonal and unit off-diagonal") {
    const auto c = build_cost_matrix(states, states, IndicatorCost{});
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        CHECK(c(i, j) == (i == j ? 0.0 : 1.0));
      }
    }
  }

  SECTION("ceil-proportional matches the printed formula") {
    const auto c = build_cost_matrix(states, states, CeilProportionalCost{10.0});
    CHECK(c(0, 0) == 0.0);
    CHECK(c(0, 1) == 10.0);  // 10 * ceil(0.2)
    CHECK(c(0, 2) == 20.0);  // 10 * ceil(2.0)
  }

  SECTION("negative scale is rejected") {
    CHECK_THROWS_AS(build_cost_matrix(states, states, CeilProportionalCost{-1.0}),
                    std::invalid_argument);
  }

  SECTION("both families are symmetric in (s, s~)") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal(0.0, 3.0);
    std::vector<Sample> raw;
    for (int i = 0; i < 6; ++i) raw.push_back({normal(rng)});
    const StateSpace random_states(raw);
    for (const CostFunctionSpec spec :
         {CostFunctionSpec(IndicatorCost{}), CostFunctionSpec(CeilProportionalCost{10.0})}) {
      const auto c = build_cost_matrix(random_states, random_states, spec);
      for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j < 6; ++j) {
          CHECK(c(i, j) == c(j, i));
        }
      }
    }
  }
}

TEST_CASE("ceil cost sums components before the ceiling when d > 1") {
  const Sample x{1.0, 2.0};
  const Sample y{1.4, 2.4};  // |dx| + |dy| = 0.8 -> ceil = 1
  CHECK(evaluate_cost(CeilProportionalCost{10.0}, x, y) == 10.0);
}

TEST_CASE("tabulated costs look entries up by value") {
  const StateSpace source({{0.0}, {1.0}});
  const StateSpace target({{0.0}, {1.0}});
  const TabulatedCost tab{source, target, {0.0, 2.5, 7.0, 0.0}};
  CHECK(evaluate_cost(CostFunctionSpec(tab), {0.0}, {1.0}) == 2.5);
  CHECK(evaluate_cost(CostFunctionSpec(tab), {1.0}, {0.0}) == 7.0);
  CHECK_THROWS_AS(evaluate_cost(CostFunctionSpec(tab), {3.0}, {0.0}), std::invalid_argument);
}

TEST_CASE("sequence_cost") {
  SECTION("identical sequences cost nothing") {
    const auto seq = scalars({1.5, -2.0, 0.25});
    CHECK(sequence_cost(seq, seq, IndicatorCost{}) == 0.0);
    CHECK(sequence_cost(seq, seq, CeilProportionalCost{10.0}) == 0.0);
  }

  SECTION("indicator cost counts changed positions") {
    CHECK(sequence_cost(scalars({1, 2, 3}), scalars({1, 5, 3}), IndicatorCost{}) == 1.0);
  }

  SECTION("ceil cost applies per position") {
    CHECK(sequence_cost(scalars({1.0, 2.0}), scalars({1.2, 2.0}), CeilProportionalCost{10.0}) ==
          10.0);
  }

  SECTION("length mismatch is rejected") {
    CHECK_THROWS_AS(sequence_cost(scalars({1, 2}), scalars({1}), IndicatorCost{}),
                    std::invalid_argument);
  }

  SECTION("indicator cost equals the Hamming distance") {
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<int> value(0, 3);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> a, b;
      for (int i = 0; i < 12; ++i) {
        a.push_back(value(rng));
        b.push_back(value(rng));
      }
      int hamming = 0;
      for (int i = 0; i < 12; ++i) {
        if (a[i] != b[i]) ++hamming;
      }
      CHECK(sequence_cost(SampleSequence::from_scalars(a), SampleSequence::from_scalars(b),
                          IndicatorCost{}) == hamming);
    }
  }
}

TEST_CASE("sample files parse comments and whitespace") {
  std::istringstream in(
      "# generated data\n"
      "1.5\n"
      "\n"
      "  2.25\n"
      "# trailing comment\n"
      "-0.5\n");
  const auto seq = read_samples(in);
  REQUIRE(seq.size() == 3);
  CHECK(seq[0][0] == 1.5);
  CHECK(seq[1][0] == 2.25);
  CHECK(seq[2][0] == -0.5);
}

TEST_CASE("sample files support d > 1 and round-trip") {
  std::istringstream in("1 2\n3 4\n");
  const auto seq = read_samples(in);
  REQUIRE(seq.dim() == 2);
  std::ostringstream out;
  write_samples(seq, out);
  std::istringstream again(out.str());
  CHECK(read_samples(again) == seq);
}

TEST_CASE("sample file errors") {
  std::istringstream empty("# nothing here\n");
  CHECK_THROWS_AS(read_samples(empty), std::invalid_argument);
  std::istringstream garbage("1.0\nnot-a-number\n");
  CHECK_THROWS_AS(read_samples(garbage), std::invalid_argument);
  CHECK_THROWS_AS(read_sample_file("/nonexistent/samples.txt"), std::invalid_argument);
}
