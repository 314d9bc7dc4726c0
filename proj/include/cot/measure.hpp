// Observation sequences, discretized state spaces, empirical measures and
// transportation cost structures. Everything here is immutable after
// construction and safe to share across concurrent runs.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace cot {

// One observation, d >= 1 components. All shipped experiments use d = 1.
using Sample = std::vector<double>;

// Thrown when a solve has no feasible transport plan.
struct InfeasibleProblem : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a transport plan cannot be turned into a usable conditional pmf.
struct DegeneratePlan : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Ordered multiset of observations O = (x_1, ..., x_N).
class SampleSequence {
 public:
  SampleSequence() = default;

  explicit SampleSequence(std::vector<Sample> samples) : samples_(std::move(samples)) {
    if (samples_.empty()) {
      throw std::invalid_argument("SampleSequence: sequence must be nonempty");
    }
    dim_ = samples_.front().size();
    if (dim_ == 0) {
      throw std::invalid_argument("SampleSequence: samples must have dimension >= 1");
    }
    for (const Sample& s : samples_) {
      if (s.size() != dim_) {
        throw std::invalid_argument("SampleSequence: all samples must share one dimension");
      }
      for (double v : s) {
        if (!std::isfinite(v)) {
          throw std::invalid_argument("SampleSequence: samples must be finite");
        }
      }
    }
  }

  static SampleSequence from_scalars(const std::vector<double>& values) {
    std::vector<Sample> samples;
    samples.reserve(values.size());
    for (double v : values) samples.push_back({v});
    return SampleSequence(std::move(samples));
  }

  std::size_t size() const { return samples_.size(); }
  std::size_t dim() const { return dim_; }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  const std::vector<Sample>& samples() const { return samples_; }

  auto begin() const { return samples_.begin(); }
  auto end() const { return samples_.end(); }

  bool operator==(const SampleSequence& other) const { return samples_ == other.samples_; }

  // Sum of the first component over the sequence; handy for scalar data.
  double scalar_sum() const {
    double acc = 0.0;
    for (const Sample& s : samples_) acc += s.front();
    return acc;
  }

 private:
  std::vector<Sample> samples_;
  std::size_t dim_ = 0;
};

// Finite ordered list of distinct states. Distinctness is bit-level on
// purpose: states come from the observed sequence itself, and a tolerance
// would silently merge distinct observations.
class StateSpace {
 public:
  StateSpace() = default;

  explicit StateSpace(std::vector<Sample> states) : states_(std::move(states)) {
    if (states_.empty()) {
      throw std::invalid_argument("StateSpace: must contain at least one state");
    }
    dim_ = states_.front().size();
    for (std::size_t i = 0; i < states_.size(); ++i) {
      if (states_[i].size() != dim_) {
        throw std::invalid_argument("StateSpace: all states must share one dimension");
      }
      for (std::size_t j = i + 1; j < states_.size(); ++j) {
        if (states_[i] == states_[j]) {
          throw std::invalid_argument("StateSpace: states must be pairwise distinct");
        }
      }
    }
  }

  // Unique values of the sequence in first-occurrence order, so that plan
  // indices and CSV output are reproducible across runs.
  static StateSpace from_sequence(const SampleSequence& seq) {
    std::vector<Sample> unique;
    for (const Sample& s : seq) {
      if (std::find(unique.begin(), unique.end(), s) == unique.end()) {
        unique.push_back(s);
      }
    }
    return StateSpace(std::move(unique));
  }

  std::size_t size() const { return states_.size(); }
  std::size_t dim() const { return dim_; }
  const Sample& state(std::size_t i) const { return states_[i]; }
  const std::vector<Sample>& states() const { return states_; }

  std::optional<std::size_t> index_of(const Sample& s) const {
    auto it = std::find(states_.begin(), states_.end(), s);
    if (it == states_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - states_.begin());
  }

  bool contains(const Sample& s) const { return index_of(s).has_value(); }

  bool operator==(const StateSpace& other) const { return states_ == other.states_; }

 private:
  std::vector<Sample> states_;
  std::size_t dim_ = 0;
};

// States with probability weights. Weights must be nonnegative and sum to 1
// within 1e-12.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure() = default;

  EmpiricalMeasure(StateSpace support, std::vector<double> weights)
      : support_(std::move(support)), weights_(std::move(weights)) {
    if (weights_.size() != support_.size()) {
      throw std::invalid_argument("EmpiricalMeasure: one weight per state required");
    }
    // Kahan summation keeps the check meaningful for very large supports.
    double total = 0.0, compensation = 0.0;
    for (double w : weights_) {
      if (!(w >= 0.0)) {
        throw std::invalid_argument("EmpiricalMeasure: weights must be nonnegative");
      }
      const double y = w - compensation;
      const double t = total + y;
      compensation = (t - total) - y;
      total = t;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw std::invalid_argument("EmpiricalMeasure: weights must sum to 1 (within 1e-12)");
    }
  }

  const StateSpace& support() const { return support_; }
  const std::vector<double>& weights() const { return weights_; }
  double weight(std::size_t i) const { return weights_[i]; }
  std::size_t size() const { return weights_.size(); }

  // Accumulated in canonical state order, so the value is bit-identical for
  // measures that differ only by support permutation.
  double mean_component(std::size_t k = 0) const;

 private:
  StateSpace support_;
  std::vector<double> weights_;
};

// Index permutation that sorts the states lexicographically. Estimators
// accumulate in this order: a permuted sequence yields the same multiset of
// (state, weight) pairs, so sorted accumulation makes J permutation-invariant
// bit-exactly, not just up to rounding.
inline std::vector<std::size_t> canonical_order(const StateSpace& space) {
  std::vector<std::size_t> order(space.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&space](std::size_t a, std::size_t b) {
    return space.state(a) < space.state(b);
  });
  return order;
}

inline double EmpiricalMeasure::mean_component(std::size_t k) const {
  double acc = 0.0;
  for (std::size_t i : canonical_order(support_)) acc += weights_[i] * support_.state(i)[k];
  return acc;
}

// p_hat: mass (count of s in O)/N at each unique observed value, states kept
// in first-occurrence order. Weights are computed as integer counts over N,
// a single rounding per state.
inline EmpiricalMeasure empirical_measure(const SampleSequence& seq) {
  StateSpace support = StateSpace::from_sequence(seq);
  std::vector<std::size_t> counts(support.size(), 0);
  for (const Sample& s : seq) {
    counts[*support.index_of(s)] += 1;
  }
  std::vector<double> weights(support.size(), 0.0);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    weights[i] = static_cast<double>(counts[i]) / static_cast<double>(seq.size());
  }
  return EmpiricalMeasure(std::move(support), std::move(weights));
}

// ---------------------------------------------------------------------------
// Transportation costs.
//
// Two closed-form families ship: the indicator cost (every change costs 1)
// and the ceil-proportional cost scale * ceil(|x~ - x|); for d > 1 the
// componentwise absolute differences are summed before the ceiling. A
// tabulated cost over explicit state spaces is available for custom setups.
// ---------------------------------------------------------------------------

struct IndicatorCost {};

struct CeilProportionalCost {
  double scale = 1.0;
};

struct TabulatedCost {
  StateSpace source;
  StateSpace target;
  std::vector<double> entries;  // row-major, source.size() x target.size()
};

using CostFunctionSpec = std::variant<IndicatorCost, CeilProportionalCost, TabulatedCost>;

inline void validate_cost_spec(const CostFunctionSpec& spec) {
  if (const auto* ceil_cost = std::get_if<CeilProportionalCost>(&spec)) {
    if (!(ceil_cost->scale >= 0.0)) {
      throw std::invalid_argument("CeilProportionalCost: scale must be nonnegative");
    }
  } else if (const auto* tab = std::get_if<TabulatedCost>(&spec)) {
    if (tab->entries.size() != tab->source.size() * tab->target.size()) {
      throw std::invalid_argument("TabulatedCost: entry count must match source x target");
    }
    for (double e : tab->entries) {
      if (!(e >= 0.0)) {
        throw std::invalid_argument("TabulatedCost: entries must be nonnegative");
      }
    }
  }
}

inline double evaluate_cost(const CostFunctionSpec& spec, const Sample& x, const Sample& x_tilde) {
  if (x.size() != x_tilde.size()) {
    throw std::invalid_argument("evaluate_cost: dimension mismatch");
  }
  if (std::holds_alternative<IndicatorCost>(spec)) {
    return x == x_tilde ? 0.0 : 1.0;
  }
  if (const auto* ceil_cost = std::get_if<CeilProportionalCost>(&spec)) {
    if (!(ceil_cost->scale >= 0.0)) {
      throw std::invalid_argument("CeilProportionalCost: scale must be nonnegative");
    }
    double diff = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) diff += std::abs(x_tilde[k] - x[k]);
    return ceil_cost->scale * std::ceil(diff);
  }
  const auto& tab = std::get<TabulatedCost>(spec);
  auto i = tab.source.index_of(x);
  auto j = tab.target.index_of(x_tilde);
  if (!i || !j) {
    throw std::invalid_argument("TabulatedCost: value not present in the tabulated state spaces");
  }
  return tab.entries[*i * tab.target.size() + *j];
}

// Dense n x m cost table between a source and a target state space.
class CostMatrix {
 public:
  CostMatrix() = default;

  CostMatrix(StateSpace source, StateSpace target, std::vector<double> entries)
      : source_(std::move(source)), target_(std::move(target)), entries_(std::move(entries)) {
    if (entries_.size() != source_.size() * target_.size()) {
      throw std::invalid_argument("CostMatrix: entry count must be n*m");
    }
    for (double e : entries_) {
      if (!(e >= 0.0)) {
        throw std::invalid_argument("CostMatrix: entries must be nonnegative");
      }
    }
  }

  std::size_t rows() const { return source_.size(); }
  std::size_t cols() const { return target_.size(); }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * cols() + j]; }
  const std::vector<double>& entries() const { return entries_; }
  const StateSpace& source() const { return source_; }
  const StateSpace& target() const { return target_; }

 private:
  StateSpace source_;
  StateSpace target_;
  std::vector<double> entries_;
};

inline CostMatrix build_cost_matrix(const StateSpace& source, const StateSpace& target,
                                    const CostFunctionSpec& spec) {
  validate_cost_spec(spec);
  std::vector<double> entries;
  entries.reserve(source.size() * target.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    for (std::size_t j = 0; j < target.size(); ++j) {
      entries.push_back(evaluate_cost(spec, source.state(i), target.state(j)));
    }
  }
  return CostMatrix(source, target, std::move(entries));
}

// Total intervention cost C_N = sum_i c(x_i, x~_i) between two sequences.
inline double sequence_cost(const SampleSequence& original, const SampleSequence& modified,
                            const CostFunctionSpec& spec) {
  if (original.size() != modified.size()) {
    throw std::invalid_argument("sequence_cost: sequences must have equal length");
  }
  if (original.dim() != modified.dim()) {
    throw std::invalid_argument("sequence_cost: sequences must have equal dimension");
  }
  validate_cost_spec(spec);
  double total = 0.0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    total += evaluate_cost(spec, original[i], modified[i]);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Plain-text sample files: one observation per line, components separated by
// whitespace, '#' starts a comment line.
// ---------------------------------------------------------------------------

inline SampleSequence read_samples(std::istream& in) {
  std::vector<Sample> samples;
  std::string line;
  while (std::getline(in, line)) {
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream row(line);
    Sample s;
    double v;
    while (row >> v) s.push_back(v);
    if (!row.eof()) {
      throw std::invalid_argument("read_samples: malformed line: " + line);
    }
    if (!s.empty()) samples.push_back(std::move(s));
  }
  if (samples.empty()) {
    throw std::invalid_argument("read_samples: no observations found");
  }
  return SampleSequence(std::move(samples));
}

inline SampleSequence read_sample_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("read_sample_file: cannot open " + path);
  }
  return read_samples(in);
}

inline void write_samples(const SampleSequence& seq, std::ostream& out) {
  out.precision(17);
  for (const Sample& s : seq) {
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (k > 0) out << ' ';
      out << s[k];
    }
    out << '\n';
  }
}

}  // namespace cot
