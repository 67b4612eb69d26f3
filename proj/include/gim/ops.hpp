// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <utility>

#include "gim/rules.hpp"
#include "gim/tensor.hpp"

namespace gim {

inline constexpr double kLayerNormEps = 1e-5;

/// weights_k = exp(scores_k / tau - m) / sum_j exp(scores_j / tau - m),
/// m = max_k scores_k / tau. Throws std::invalid_argument for tau <= 0.
Tensor softmax_forward(const Tensor& scores, double temperature);

/// Gradient of a scalar objective through a softmax, given the upstream
/// gradient g with respect to the weights:
///
///   grad_j = (1 / tau_fwd) * w_j * (g_j - <g, w>)
///
/// where w is the forward softmax output for the standard rule, or the
/// weights recomputed at temperature tau_fwd * T for the temperature-adjusted
/// rule. The 1/tau_fwd chain factor is kept in both cases; no extra 1/T is
/// applied, so T = 1 reproduces the standard rule bitwise and gradient scale
/// stays comparable across T.
Tensor softmax_backward(const Tensor& scores, const Tensor& upstream,
                        const GradientRuleSet& rules,
                        double forward_temperature);

struct LayerNormResult {
  Tensor y;
  double sigma;
};

/// y = (x - mean(x)) / sigma, sigma = sqrt(var(x) + eps), population
/// variance. Requires dim >= 2.
LayerNormResult layernorm_forward(const Tensor& x, double eps = kLayerNormEps);

/// Standard: exact Jacobian-vector product of layernorm_forward.
/// Freeze: (upstream - mean(upstream)) / sigma, sigma held constant; the
/// mean-centering term stays because the subtraction is affine.
Tensor layernorm_backward(const Tensor& x, double sigma,
                          const Tensor& upstream, LayerNormRule rule);

/// Elementwise product backward. GradNorm divides both gradients by the
/// number of multiplicands (2).
std::pair<Tensor, Tensor> mul_backward(const Tensor& a, const Tensor& b,
                                       const Tensor& upstream,
                                       MultiplyRule rule);

/// Contraction (C = A * B) backward: dA = G * B^T, dB = A^T * G, both halved
/// under GradNorm.
std::pair<Tensor, Tensor> matmul_backward(const Tensor& a, const Tensor& b,
                                          const Tensor& upstream,
                                          MultiplyRule rule);

/// Central finite differences (f(x + h e_i) - f(x - h e_i)) / 2h per
/// coordinate. f must be pure; coordinates are evaluated in parallel.
Tensor finite_difference(const std::function<double(const Tensor&)>& f,
                         const Tensor& x, double h);

}  // namespace gim
