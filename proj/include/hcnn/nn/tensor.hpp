/*
 * Copyright 2026 The hcnn Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hcnn/error.hpp"

namespace hcnn::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

/// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}
  Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != shape_size(shape_))
      throw ShapeMismatch("tensor of shape " + shape_str(shape_) + " given " + std::to_string(values_.size()) +
                          " values");
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return values_.size(); }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double& at(std::size_t i, std::size_t j) { return values_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return values_[i * shape_[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) { return values_[(i * shape_[1] + j) * shape_[2] + k]; }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
  }

  double* row(std::size_t i) { return values_.data() + i * (values_.size() / shape_[0]); }
  const double* row(std::size_t i) const { return values_.data() + i * (values_.size() / shape_[0]); }

  /// Reshapes in place, reusing storage. Contents are unspecified unless fill is given.
  void resize(const Shape& shape) {
    shape_ = shape;
    values_.resize(shape_size(shape_));
  }
  void resize(const Shape& shape, double fill) {
    resize(shape);
    std::fill(values_.begin(), values_.end(), fill);
  }
  void fill(double v) { std::fill(values_.begin(), values_.end(), v); }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

/// A trainable array with its gradient and adadelta accumulators.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor acc_grad_sq;
  Tensor acc_delta_sq;

  Parameter() = default;
  Parameter(std::string n, Shape shape)
      : name(std::move(n)), value(shape), grad(shape), acc_grad_sq(shape), acc_delta_sq(shape) {}

  const Shape& shape() const noexcept { return value.shape(); }
  std::size_t size() const noexcept { return value.size(); }
  void zero_grad() { grad.fill(0.0); }
};

}  // namespace hcnn::nn
