// SPDX-License-Identifier: Apache-2.0
#include "gbn/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace gbn {

Shape::Shape(std::initializer_list<std::size_t> dims)
    : Shape(std::span<const std::size_t>(dims.begin(), dims.size())) {}

Shape::Shape(std::span<const std::size_t> dims) {
  if (dims.size() > kMaxRank)
    throw std::invalid_argument("Shape: rank " + std::to_string(dims.size()) +
                                " exceeds maximum " + std::to_string(kMaxRank));
  for (std::size_t d : dims) {
    if (d == 0) throw std::invalid_argument("Shape: dimensions must be positive");
    dims_[rank_++] = d;
  }
}

std::size_t Shape::numel() const {
  std::size_t n = 1;
  for (std::size_t i = 0; i < rank_; ++i) n *= dims_[i];
  return n;
}

std::string Shape::str() const {
  std::string s = "[";
  for (std::size_t i = 0; i < rank_; ++i) {
    if (i) s += "x";
    s += std::to_string(dims_[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape) : shape_(shape), data_(shape.numel(), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel())
    throw std::invalid_argument("Tensor: data length " +
                                std::to_string(data_.size()) +
                                " does not match shape " + shape_.str());
}

Tensor Tensor::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor(Shape{n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> data) {
  return Tensor(Shape{rows, cols}, std::move(data));
}

double Tensor::item() const {
  if (data_.size() != 1)
    throw std::invalid_argument("Tensor::item on non-scalar " + shape_.str());
  return data_[0];
}

void Tensor::fill(double v) {
  for (double& x : data_) x = v;
}

bool Tensor::all_finite() const {
  for (double x : data_)
    if (!std::isfinite(x)) return false;
  return true;
}

double Tensor::squared_norm() const {
  double s = 0.0;
  for (double x : data_) s += x * x;
  return s;
}

}  // namespace gbn
