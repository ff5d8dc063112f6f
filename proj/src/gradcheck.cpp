#include "defemo/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "defemo/error.hpp"

namespace defemo {

namespace {

double evaluate(const LossBuilder& builder) {
  Graph<double> g;
  return builder(g).value().item();
}

}  // namespace

GradcheckResult finite_difference_gradcheck(std::span<Parameter<double>* const> params,
                                            const LossBuilder& builder, double eps,
                                            std::size_t max_elements_per_param) {
  if (!(eps >= 1e-6 && eps <= 1e-3)) {
    throw ConfigError("gradcheck: eps must lie in [1e-6, 1e-3], got " + std::to_string(eps));
  }

  Gradients<double> grads;
  double base = 0.0;
  {
    Graph<double> g;
    auto loss = builder(g);
    base = loss.value().item();
    grads = g.backward(loss);
  }
  const double again = evaluate(builder);
  if (std::memcmp(&base, &again, sizeof base) != 0) {
    throw Error("gradcheck: loss builder is not deterministic (unseeded dropout?)");
  }

  GradcheckResult result;
  for (auto* p : params) {
    const Tensor<double> analytic = grads.of(*p);
    const std::size_t n = p->value.size();
    const std::size_t probes = std::min(n, std::max<std::size_t>(max_elements_per_param, 1));
    for (std::size_t k = 0; k < probes; ++k) {
      const std::size_t i = probes == n ? k : k * n / probes;
      const double orig = p->value.data[i];
      p->value.data[i] = orig + eps;
      const double f_plus = evaluate(builder);
      p->value.data[i] = orig - eps;
      const double f_minus = evaluate(builder);
      p->value.data[i] = orig;

      const double numeric = (f_plus - f_minus) / (2.0 * eps);
      const double a = analytic.data[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      ++result.elements_checked;
      result.max_abs_analytic = std::max(result.max_abs_analytic, std::abs(a));
      result.max_abs_numeric = std::max(result.max_abs_numeric, std::abs(numeric));
      if (rel > result.max_rel_error || result.elements_checked == 1) {
        result.max_rel_error = std::max(rel, result.max_rel_error);
        if (rel >= result.max_rel_error) {
          result.worst_param = p->name;
          result.worst_index = i;
          result.worst_analytic = a;
          result.worst_numeric = numeric;
        }
      }
    }
  }
  return result;
}

}  // namespace defemo
