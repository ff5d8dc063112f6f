#include "defemo/tensor.hpp"

#include <cmath>

#include "defemo/error.hpp"

namespace defemo {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
Tensor<T>::Tensor(Shape s, T fill) : shape(std::move(s)) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
  data.assign(numel(shape), fill);
}

template <typename T>
Tensor<T>::Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
  if (numel(shape) != data.size()) {
    throw ShapeError("shape " + shape_str(shape) + " does not match " +
                     std::to_string(data.size()) + " values");
  }
}

template <typename T>
T Tensor<T>::item() const {
  if (data.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape));
  return data[0];
}

template <typename T>
bool Tensor<T>::all_finite() const {
  for (auto v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template struct Tensor<float>;
template struct Tensor<double>;

}  // namespace defemo
