#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace defemo {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major array. A rank-0 shape holds a single scalar.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() : data(1, T{0}) {}
  explicit Tensor(Shape s, T fill = T{0});
  Tensor(Shape s, std::vector<T> values);

  static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t axis) const { return shape.at(axis); }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  // Value of a single-element tensor.
  T item() const;

  bool all_finite() const;

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

extern template struct Tensor<float>;
extern template struct Tensor<double>;

}  // namespace defemo
