#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "fastqa/common.hpp"

namespace fastqa {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);

// Dense row-major tensor. double is used for gradient checking, float for
// training; finite differences are not reliable at 32-bit precision.
template <typename T>
struct TensorT {
  Shape shape;
  std::vector<T> data;
  bool requires_grad = false;
  std::vector<T> grad;  // empty until touched by backward; same length as data once allocated

  TensorT() = default;
  TensorT(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
      throw Error("tensor: data length " + std::to_string(data.size()) +
                  " does not match shape " + shape_str(shape));
    }
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int64_t dim(size_t i) const { return shape.at(i); }
  int rank() const { return static_cast<int>(shape.size()); }
  bool is_scalar() const { return shape.empty() || (shape.size() == 1 && shape[0] == 1); }

  T scalar() const {
    if (numel() != 1) throw Error("tensor: scalar() on shape " + shape_str(shape));
    return data[0];
  }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
  void zero_grad() { grad.assign(data.size(), T(0)); }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    out.requires_grad = requires_grad;
    return out;
  }
};

using Tensor32 = TensorT<float>;
using Tensor64 = TensorT<double>;

template <typename T>
TensorT<T> zeros(Shape shape) {
  auto n = shape_numel(shape);
  return TensorT<T>(std::move(shape), std::vector<T>(static_cast<size_t>(n), T(0)));
}

template <typename T>
TensorT<T> full(Shape shape, T value) {
  auto n = shape_numel(shape);
  return TensorT<T>(std::move(shape), std::vector<T>(static_cast<size_t>(n), value));
}

template <typename T>
TensorT<T> uniform(Shape shape, std::mt19937_64& rng, T lo, T hi) {
  auto n = shape_numel(shape);
  std::uniform_real_distribution<double> dist(static_cast<double>(lo), static_cast<double>(hi));
  std::vector<T> d(static_cast<size_t>(n));
  for (auto& v : d) v = static_cast<T>(dist(rng));
  return TensorT<T>(std::move(shape), std::move(d));
}

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
template <typename T>
TensorT<T> fan_in_uniform(Shape shape, int64_t fan_in, std::mt19937_64& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in > 0 ? fan_in : 1));
  return uniform<T>(std::move(shape), rng, static_cast<T>(-bound), static_cast<T>(bound));
}

}  // namespace fastqa
