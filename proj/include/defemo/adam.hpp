#pragma once

#include <cstdint>

#include "defemo/autodiff.hpp"
#include "defemo/tensor.hpp"

namespace defemo {

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Per-parameter optimizer state. Moments are lazily shaped on first update.
template <typename T>
struct AdamState {
  std::uint64_t step_count = 0;
  Tensor<T> first_moment;
  Tensor<T> second_moment;
};

// One bias-corrected Adam update of `param` in place. A gradient containing
// NaN/Inf raises NumericError and leaves both parameter and state untouched.
template <typename T>
void adam_step(Parameter<T>& param, const Tensor<T>& grad, AdamState<T>& state, const AdamHyper& hyper);

extern template void adam_step(Parameter<float>&, const Tensor<float>&, AdamState<float>&, const AdamHyper&);
extern template void adam_step(Parameter<double>&, const Tensor<double>&, AdamState<double>&, const AdamHyper&);

}  // namespace defemo
