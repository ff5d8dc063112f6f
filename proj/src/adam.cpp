#include "defemo/adam.hpp"

#include <cmath>

#include "defemo/error.hpp"

namespace defemo {

template <typename T>
void adam_step(Parameter<T>& param, const Tensor<T>& grad, AdamState<T>& state, const AdamHyper& hyper) {
  if (grad.shape != param.value.shape) {
    throw ShapeError("adam_step: gradient " + shape_str(grad.shape) + " does not match parameter '" +
                     param.name + "' " + shape_str(param.value.shape));
  }
  if (!grad.all_finite()) throw NumericError("adam_step: non-finite gradient for '" + param.name + "'");
  if (state.step_count == 0) {
    state.first_moment = Tensor<T>(param.value.shape);
    state.second_moment = Tensor<T>(param.value.shape);
  } else if (state.first_moment.shape != param.value.shape) {
    throw ShapeError("adam_step: optimizer state shape mismatch for '" + param.name + "'");
  }

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const T b1 = static_cast<T>(hyper.beta1);
  const T b2 = static_cast<T>(hyper.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(hyper.beta1, t));
  const T c2 = static_cast<T>(1.0 - std::pow(hyper.beta2, t));
  const T lr = static_cast<T>(hyper.learning_rate);
  const T eps = static_cast<T>(hyper.epsilon);

  auto& m = state.first_moment.data;
  auto& v = state.second_moment.data;
  auto& w = param.value.data;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const T g = grad.data[i];
    m[i] = b1 * m[i] + (T{1} - b1) * g;
    v[i] = b2 * v[i] + (T{1} - b2) * g * g;
    const T m_hat = m[i] / c1;
    const T v_hat = v[i] / c2;
    w[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

template void adam_step(Parameter<float>&, const Tensor<float>&, AdamState<float>&, const AdamHyper&);
template void adam_step(Parameter<double>&, const Tensor<double>&, AdamState<double>&, const AdamHyper&);

}  // namespace defemo
