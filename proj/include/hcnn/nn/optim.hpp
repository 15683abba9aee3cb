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
#include <functional>
#include <span>
#include <vector>

#include "hcnn/error.hpp"
#include "hcnn/nn/tensor.hpp"

namespace hcnn::nn {

inline constexpr double kAdadeltaRho = 0.95;
inline constexpr double kAdadeltaEps = 1e-6;

/// One adadelta update, elementwise:
///   Eg2  <- rho Eg2 + (1 - rho) g^2
///   dx   <- -sqrt(Edx2 + eps) / sqrt(Eg2 + eps) * g
///   Edx2 <- rho Edx2 + (1 - rho) dx^2
///   x    <- x + dx
/// The gradient is cleared afterwards.
inline void adadelta_step(Parameter& p, double rho = kAdadeltaRho, double eps = kAdadeltaEps) {
  double* x = p.value.data();
  double* g = p.grad.data();
  double* eg2 = p.acc_grad_sq.data();
  double* edx2 = p.acc_delta_sq.data();
  for (std::size_t i = 0, n = p.size(); i < n; ++i) {
    eg2[i] = rho * eg2[i] + (1.0 - rho) * g[i] * g[i];
    const double dx = -(std::sqrt(edx2[i] + eps) / std::sqrt(eg2[i] + eps)) * g[i];
    edx2[i] = rho * edx2[i] + (1.0 - rho) * dx * dx;
    x[i] += dx;
    g[i] = 0.0;
  }
}

/// Compares analytic gradients with central differences
/// (f(x + eps) - f(x - eps)) / 2 eps for every element of every parameter.
///
/// `compute_grads` must fill Parameter::grad for the current values (grads are
/// zeroed before it runs); `loss` must be a deterministic function of the
/// parameter values. Returns the worst relative error, with denominator
/// max(|analytic|, |numeric|, 1e-8). Throws NonFiniteValue on NaN/Inf.
inline double grad_check(std::span<Parameter* const> params, const std::function<double()>& loss,
                         const std::function<void()>& compute_grads, double eps = 1e-6) {
  for (auto* p : params) p->zero_grad();
  compute_grads();
  double worst = 0.0;
  for (auto* p : params) {
    if (!p->grad.all_finite()) throw NonFiniteValue("analytic gradient of '" + p->name + "' is not finite");
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + eps;
      const double up = loss();
      p->value[i] = saved - eps;
      const double down = loss();
      p->value[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw NonFiniteValue("loss is not finite while perturbing '" + p->name + "'");
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p->grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace hcnn::nn
