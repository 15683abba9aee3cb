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

// Forward/backward pairs for the layers of the text CNN. Backward functions
// accumulate into Parameter::grad (they never clear it) and return or fill the
// gradient with respect to their input where one exists.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hcnn/error.hpp"
#include "hcnn/nn/tensor.hpp"
#include "hcnn/rng.hpp"

namespace hcnn::nn {

namespace detail {

// Four independent partial sums; the order is fixed so results are
// reproducible bit for bit.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Embedding lookup

inline void embedding_forward(std::span<const std::int32_t> indices, const Parameter& table, Tensor& out) {
  const std::size_t rows = table.value.dim(0), d = table.value.dim(1);
  out.resize({indices.size(), d});
  for (std::size_t t = 0; t < indices.size(); ++t) {
    const auto idx = indices[t];
    if (idx < 0 || static_cast<std::size_t>(idx) >= rows)
      throw IndexOutOfRange("embedding index " + std::to_string(idx) + " outside [0, " + std::to_string(rows) + ")");
    std::copy_n(table.value.row(static_cast<std::size_t>(idx)), d, out.row(t));
  }
}

inline Tensor embedding_forward(std::span<const std::int32_t> indices, const Parameter& table) {
  Tensor out;
  embedding_forward(indices, table, out);
  return out;
}

/// Repeated indices accumulate.
inline void embedding_backward(std::span<const std::int32_t> indices, const Tensor& upstream, Parameter& table) {
  const std::size_t d = table.value.dim(1);
  for (std::size_t t = 0; t < indices.size(); ++t)
    detail::axpy(1.0, upstream.row(t), table.grad.row(static_cast<std::size_t>(indices[t])), d);
}

// ---------------------------------------------------------------------------
// Narrow 1-D convolution over time, stride 1.
//   input [L, d], filters [m, h, d], bias [m]  ->  output [L - h + 1, m]

inline void conv1d_forward(const Tensor& input, const Parameter& filters, const Parameter& bias, Tensor& out) {
  const std::size_t L = input.dim(0), d = input.dim(1);
  const std::size_t m = filters.value.dim(0), h = filters.value.dim(1);
  if (filters.value.dim(2) != d || bias.value.size() != m)
    throw ShapeMismatch("conv1d: filters " + shape_str(filters.shape()) + " vs input " + shape_str(input.shape()));
  if (L < h)
    throw DocumentTooShort("conv1d: document length " + std::to_string(L) + " below window " + std::to_string(h));
  const std::size_t T = L - h + 1, hd = h * d;
  out.resize({T, m});
  // Row t's window is the contiguous block input[t .. t+h).
  for (std::size_t t = 0; t < T; ++t) {
    const double* window = input.data() + t * d;
    double* o = out.row(t);
    for (std::size_t j = 0; j < m; ++j) o[j] = bias.value[j] + detail::dot(filters.value.data() + j * hd, window, hd);
  }
}

inline Tensor conv1d_forward(const Tensor& input, const Parameter& filters, const Parameter& bias) {
  Tensor out;
  conv1d_forward(input, filters, bias, out);
  return out;
}

/// grad_input may be null when the input gradient is not needed. Zero
/// upstream entries are skipped, so after max pooling only the argmax rows cost
/// anything.
inline void conv1d_backward(const Tensor& input, Parameter& filters, Parameter& bias, const Tensor& upstream,
                            Tensor* grad_input) {
  const std::size_t d = input.dim(1);
  const std::size_t m = filters.value.dim(0), h = filters.value.dim(1), hd = h * d;
  const std::size_t T = upstream.dim(0);
  if (grad_input) grad_input->resize(input.shape(), 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    const double* window = input.data() + t * d;
    for (std::size_t j = 0; j < m; ++j) {
      const double g = upstream.at(t, j);
      if (g == 0.0) continue;
      bias.grad[j] += g;
      detail::axpy(g, window, filters.grad.data() + j * hd, hd);
      if (grad_input) detail::axpy(g, filters.value.data() + j * hd, grad_input->data() + t * d, hd);
    }
  }
}

// ---------------------------------------------------------------------------
// Max-over-time pooling. Ties go to the lowest time index.

struct PoolResult {
  Tensor values;                    // [m]
  std::vector<std::size_t> argmax;  // per column
};

inline void max_over_time_pool(const Tensor& input, PoolResult& out) {
  const std::size_t T = input.dim(0), m = input.dim(1);
  if (T == 0) throw ShapeMismatch("max_over_time_pool: empty time axis");
  out.values.resize({m});
  out.argmax.assign(m, 0);
  std::copy_n(input.row(0), m, out.values.data());
  for (std::size_t t = 1; t < T; ++t) {
    const double* r = input.row(t);
    for (std::size_t j = 0; j < m; ++j)
      if (r[j] > out.values[j]) {
        out.values[j] = r[j];
        out.argmax[j] = t;
      }
  }
}

inline PoolResult max_over_time_pool(const Tensor& input) {
  PoolResult out;
  max_over_time_pool(input, out);
  return out;
}

inline void max_pool_backward(const Tensor& upstream, std::span<const std::size_t> argmax, std::size_t T,
                              Tensor& grad_input) {
  const std::size_t m = argmax.size();
  grad_input.resize({T, m}, 0.0);
  for (std::size_t j = 0; j < m; ++j) grad_input.at(argmax[j], j) += upstream[j];
}

inline Tensor max_pool_backward(const Tensor& upstream, std::span<const std::size_t> argmax, std::size_t T) {
  Tensor g;
  max_pool_backward(upstream, argmax, T, g);
  return g;
}

// ---------------------------------------------------------------------------
// Affine map with optional relu.  weights [p, n], bias [p]

enum class Activation { None, Relu };

inline void dense_forward(const Tensor& input, const Parameter& weights, const Parameter& bias, Activation act,
                          Tensor& out) {
  const std::size_t p = weights.value.dim(0), n = weights.value.dim(1);
  if (input.size() != n || bias.value.size() != p)
    throw ShapeMismatch("dense: weights " + shape_str(weights.shape()) + " vs input " + shape_str(input.shape()));
  out.resize({p});
  for (std::size_t i = 0; i < p; ++i) {
    double z = bias.value[i] + detail::dot(weights.value.row(i), input.data(), n);
    out[i] = (act == Activation::Relu && z < 0.0) ? 0.0 : z;
  }
}

inline Tensor dense_forward(const Tensor& input, const Parameter& weights, const Parameter& bias, Activation act) {
  Tensor out;
  dense_forward(input, weights, bias, act, out);
  return out;
}

/// `output` is the forward result; for relu the unit is active iff output > 0.
inline void dense_backward(const Tensor& input, const Tensor& output, Parameter& weights, Parameter& bias,
                           Activation act, const Tensor& upstream, Tensor* grad_input) {
  const std::size_t p = weights.value.dim(0), n = weights.value.dim(1);
  if (grad_input) grad_input->resize({n}, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    double g = upstream[i];
    if (act == Activation::Relu && !(output[i] > 0.0)) g = 0.0;
    if (g == 0.0) continue;
    bias.grad[i] += g;
    detail::axpy(g, input.data(), weights.grad.row(i), n);
    if (grad_input) detail::axpy(g, weights.value.row(i), grad_input->data(), n);
  }
}

// ---------------------------------------------------------------------------
// Inverted dropout: survivors are scaled by 1/(1-rate) at train time, so
// inference is the identity.

struct DropoutResult {
  Tensor output;
  Tensor mask;  // per element: 0 or 1/(1-rate)
};

inline void dropout(const Tensor& input, double rate, bool training, Rng& rng, DropoutResult& out) {
  out.output = input;
  out.mask.resize(input.shape(), 1.0);
  if (!training || rate <= 0.0) return;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < input.size(); ++i) {
    out.mask[i] = rng.bernoulli(rate) ? 0.0 : keep_scale;
    out.output[i] = input[i] * out.mask[i];
  }
}

inline DropoutResult dropout(const Tensor& input, double rate, bool training, Rng& rng) {
  DropoutResult out;
  dropout(input, rate, training, rng, out);
  return out;
}

/// Re-applies a previously drawn mask; used when a fixed mask is needed.
inline void apply_mask(const Tensor& input, const Tensor& mask, Tensor& out) {
  out.resize(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] * mask[i];
}

inline void dropout_backward(const Tensor& upstream, const Tensor& mask, Tensor& grad_input) {
  apply_mask(upstream, mask, grad_input);
}

// ---------------------------------------------------------------------------
// Softmax + cross-entropy.

struct SoftmaxXent {
  double loss = 0.0;
  Tensor prob;
  Tensor grad_logits;
};

inline void softmax(const Tensor& logits, Tensor& prob) {
  prob.resize(logits.shape());
  const double mx = *std::max_element(logits.values().begin(), logits.values().end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    prob[i] = std::exp(logits[i] - mx);
    sum += prob[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) prob[i] /= sum;
}

inline void softmax_cross_entropy(const Tensor& logits, std::size_t gold, SoftmaxXent& out) {
  if (gold >= logits.size()) throw IndexOutOfRange("gold class " + std::to_string(gold) + " out of range");
  const double mx = *std::max_element(logits.values().begin(), logits.values().end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += std::exp(logits[i] - mx);
  const double log_z = mx + std::log(sum);
  out.prob.resize(logits.shape());
  out.grad_logits.resize(logits.shape());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.prob[i] = std::exp(logits[i] - log_z);
    out.grad_logits[i] = out.prob[i] - (i == gold ? 1.0 : 0.0);
  }
  out.loss = log_z - logits[gold];
}

inline SoftmaxXent softmax_cross_entropy(const Tensor& logits, std::size_t gold) {
  SoftmaxXent out;
  softmax_cross_entropy(logits, gold, out);
  return out;
}

}  // namespace hcnn::nn
