#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>

#include "defemo/autodiff.hpp"

namespace defemo {

// Builds a scalar loss from the current parameter values.
using LossBuilder = std::function<Var<double>(Graph<double>&)>;

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t elements_checked = 0;
  double max_abs_analytic = 0.0;
  double max_abs_numeric = 0.0;
};

// Compares analytic gradients of every element of `params` against central
// differences (f(x+eps) - f(x-eps)) / 2eps. Relative error uses the
// denominator max(|a|, |n|, 1e-8). `max_elements_per_param` caps the work on
// large tensors by probing a deterministic evenly spaced subset.
//
// Throws ConfigError when eps is outside [1e-6, 1e-3] and Error when the
// builder is not deterministic (two evaluations at the same point differ).
GradcheckResult finite_difference_gradcheck(
    std::span<Parameter<double>* const> params, const LossBuilder& builder, double eps = 1e-4,
    std::size_t max_elements_per_param = std::numeric_limits<std::size_t>::max());

}  // namespace defemo
