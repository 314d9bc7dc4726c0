// The student's estimator contract J over empirical measures, the concrete
// estimators used by the experiments, and the numerical Gateaux gradient that
// feeds the Taylor model of the transport objective.
#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cot/measure.hpp"

namespace cot {

// Estimated parameter value(s). Scalar in all shipped experiments, but the
// gradient and solver handle dim >= 1 coordinatewise.
struct ParameterVector {
  std::vector<double> values;

  ParameterVector() = default;
  explicit ParameterVector(double scalar) : values{scalar} { validate(); }
  explicit ParameterVector(std::vector<double> v) : values(std::move(v)) { validate(); }

  std::size_t dim() const { return values.size(); }

  double scalar() const {
    if (values.size() != 1) {
      throw std::invalid_argument("ParameterVector: scalar() requires dimension 1");
    }
    return values.front();
  }

  bool operator==(const ParameterVector& other) const { return values == other.values; }

 private:
  void validate() const {
    if (values.empty()) {
      throw std::invalid_argument("ParameterVector: dimension must be >= 1");
    }
    for (double v : values) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("ParameterVector: entries must be finite");
      }
    }
  }
};

inline double parameter_distance(const ParameterVector& a, const ParameterVector& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("parameter_distance: dimension mismatch");
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < a.dim(); ++k) {
    const double d = a.values[k] - b.values[k];
    acc += d * d;
  }
  return std::sqrt(acc);
}

// A named evaluation rule J: empirical measure -> parameter vector. The rule
// must be deterministic and depend on a sequence only through its empirical
// measure. is_linear marks rules that are affine in the measure, for which
// the Taylor model is exact.
class Estimator {
 public:
  using EvalFn = std::function<ParameterVector(const EmpiricalMeasure&)>;
  using DomainFn = std::function<bool(const Sample&)>;

  Estimator(std::string name, bool is_linear, EvalFn eval, DomainFn state_in_domain = nullptr)
      : name_(std::move(name)),
        is_linear_(is_linear),
        eval_(std::move(eval)),
        domain_(std::move(state_in_domain)) {}

  const std::string& name() const { return name_; }
  bool is_linear() const { return is_linear_; }

  ParameterVector operator()(const EmpiricalMeasure& measure) const { return eval_(measure); }

  bool state_in_domain(const Sample& s) const { return domain_ ? domain_(s) : true; }

 private:
  std::string name_;
  bool is_linear_;
  EvalFn eval_;
  DomainFn domain_;
};

namespace detail {
inline void require_scalar_support(const EmpiricalMeasure& measure, const char* who) {
  if (measure.support().dim() != 1) {
    throw std::invalid_argument(std::string(who) + ": requires scalar observations");
  }
}
}  // namespace detail

// Plug-in variance: E[s^2] - E[s]^2. Sums run in canonical state order so
// permuted sequences evaluate bit-identically.
inline Estimator make_variance_estimator() {
  return Estimator("variance", /*is_linear=*/false, [](const EmpiricalMeasure& m) {
    detail::require_scalar_support(m, "variance");
    double first = 0.0, second = 0.0;
    for (std::size_t i : canonical_order(m.support())) {
      const double s = m.support().state(i)[0];
      first += m.weight(i) * s;
      second += m.weight(i) * s * s;
    }
    return ParameterVector(second - first * first);
  });
}

// Componentwise mean; affine in the measure, so the Taylor model reproduces
// it exactly.
inline Estimator make_mean_estimator() {
  return Estimator("mean", /*is_linear=*/true, [](const EmpiricalMeasure& m) {
    const std::size_t d = m.support().dim();
    std::vector<double> mean(d, 0.0);
    for (std::size_t i : canonical_order(m.support())) {
      for (std::size_t k = 0; k < d; ++k) {
        mean[k] += m.weight(i) * m.support().state(i)[k];
      }
    }
    return ParameterVector(std::move(mean));
  });
}

// Known-shape maximum-likelihood scale: (sum_i w_i s_i^k)^(1/k). Support
// points must be nonnegative.
inline Estimator make_weibull_scale_estimator(double shape_k) {
  if (!(shape_k > 0.0)) {
    throw std::invalid_argument("weibull_scale: shape k must be positive");
  }
  auto in_domain = [](const Sample& s) { return s[0] >= 0.0; };
  return Estimator(
      "weibull_scale", /*is_linear=*/false,
      [shape_k](const EmpiricalMeasure& m) {
        detail::require_scalar_support(m, "weibull_scale");
        double acc = 0.0;
        for (std::size_t i : canonical_order(m.support())) {
          const double s = m.support().state(i)[0];
          if (s < 0.0) {
            throw std::invalid_argument("weibull_scale: support points must be >= 0");
          }
          acc += m.weight(i) * std::pow(s, shape_k);
        }
        return ParameterVector(std::pow(acc, 1.0 / shape_k));
      },
      in_domain);
}

// Reward-weight update applied to a corrected feature-count sequence:
// theta_hat + beta * (sum of original counts - sum of corrected counts).
inline double irl_weight_update(double theta_hat, const SampleSequence& original_counts,
                                const SampleSequence& corrected_counts, double beta) {
  if (original_counts.size() != corrected_counts.size()) {
    throw std::invalid_argument("irl_weight_update: count sequences must have equal length");
  }
  if (!(beta < 0.0)) {
    throw std::invalid_argument("irl_weight_update: beta must be negative");
  }
  return theta_hat + beta * (original_counts.scalar_sum() - corrected_counts.scalar_sum());
}

// The same update as a measure functional, usable by the transport pipeline:
// J(p) = theta_hat + beta * (original_sum - N * E_p[s]). Affine in the
// measure. n_samples is the (fixed) sequence length N.
inline Estimator make_irl_weight_estimator(double theta_hat, double beta, double original_sum,
                                           std::size_t n_samples) {
  if (!(beta < 0.0)) {
    throw std::invalid_argument("irl_update: beta must be negative");
  }
  return Estimator("irl_update", /*is_linear=*/true,
                   [theta_hat, beta, original_sum, n_samples](const EmpiricalMeasure& m) {
                     detail::require_scalar_support(m, "irl_update");
                     const double corrected_sum =
                         static_cast<double>(n_samples) * m.mean_component(0);
                     return ParameterVector(theta_hat + beta * (original_sum - corrected_sum));
                   });
}

// ---------------------------------------------------------------------------
// Numerical gradient.
//
// g(s) approximates the Gateaux derivative of J at p_hat along delta_s -
// p_hat, evaluated through the simplex-preserving mixture (1-eps) p_hat +
// eps delta_s:
//
//   forward:  g(s) = [J((1-eps) p + eps d_s) - J(p)] / eps
//   central:  g(s) = [J((1-eps) p + eps d_s) - J((1+eps) p - eps d_s)] / (2 eps)
//
// Central differences cancel the first-order truncation term (exact for
// measure-quadratic J such as the variance), but the backward point is a
// probability measure only when s already carries p-weight >= eps/(1+eps);
// otherwise the central scheme is rejected. Forward is the default.
// ---------------------------------------------------------------------------

enum class DifferenceScheme { Forward, Central };

// Per-target Gateaux derivative estimates, one row per parameter coordinate.
struct GradientField {
  std::vector<std::vector<double>> values;  // [coordinate][target]
  double epsilon = 0.0;

  std::size_t parameter_dim() const { return values.size(); }
  std::size_t num_targets() const { return values.empty() ? 0 : values.front().size(); }
  double at(std::size_t coordinate, std::size_t target) const {
    return values[coordinate][target];
  }
};

namespace detail {

// Mixture (1-eps) base + eps delta_target; target appended to the support if
// it is not already a state.
inline EmpiricalMeasure mixture_with_point_mass(const EmpiricalMeasure& base,
                                                const Sample& target, double eps) {
  std::vector<Sample> states = base.support().states();
  std::vector<double> weights = base.weights();
  for (double& w : weights) w *= (1.0 - eps);
  if (auto idx = base.support().index_of(target)) {
    weights[*idx] += eps;
  } else {
    states.push_back(target);
    weights.push_back(eps);
  }
  return EmpiricalMeasure(StateSpace(std::move(states)), std::move(weights));
}

// Mixture (1+eps) base - eps delta_target; only valid when target is a state
// with enough mass to stay nonnegative.
inline EmpiricalMeasure mixture_against_point_mass(const EmpiricalMeasure& base,
                                                   const Sample& target, double eps) {
  auto idx = base.support().index_of(target);
  if (!idx || base.weight(*idx) < eps / (1.0 + eps)) {
    throw std::invalid_argument(
        "numerical_gradient: central differences need target weight >= eps/(1+eps)");
  }
  std::vector<double> weights = base.weights();
  for (double& w : weights) w *= (1.0 + eps);
  weights[*idx] -= eps;
  return EmpiricalMeasure(base.support(), std::move(weights));
}

}  // namespace detail

inline GradientField numerical_gradient(const Estimator& estimator, const EmpiricalMeasure& base,
                                        const StateSpace& targets, double epsilon,
                                        DifferenceScheme scheme = DifferenceScheme::Forward) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("numerical_gradient: epsilon must lie in (0, 1)");
  }
  if (targets.dim() != base.support().dim()) {
    throw std::invalid_argument("numerical_gradient: target dimension mismatch");
  }
  for (std::size_t j = 0; j < targets.size(); ++j) {
    if (!estimator.state_in_domain(targets.state(j))) {
      throw std::invalid_argument("numerical_gradient: target state outside estimator domain");
    }
  }

  const ParameterVector at_base = estimator(base);
  GradientField field;
  field.epsilon = epsilon;
  field.values.assign(at_base.dim(), std::vector<double>(targets.size(), 0.0));

  for (std::size_t j = 0; j < targets.size(); ++j) {
    const ParameterVector forward =
        estimator(detail::mixture_with_point_mass(base, targets.state(j), epsilon));
    if (scheme == DifferenceScheme::Forward) {
      for (std::size_t k = 0; k < at_base.dim(); ++k) {
        field.values[k][j] = (forward.values[k] - at_base.values[k]) / epsilon;
      }
    } else {
      const ParameterVector backward =
          estimator(detail::mixture_against_point_mass(base, targets.state(j), epsilon));
      for (std::size_t k = 0; k < at_base.dim(); ++k) {
        field.values[k][j] = (forward.values[k] - backward.values[k]) / (2.0 * epsilon);
      }
    }
  }
  return field;
}

}  // namespace cot
