// SPDX-License-Identifier: Apache-2.0
#include "gim/ops.hpp"

#include <stdexcept>

#include "gim/kernels.hpp"

namespace gim {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                a.shape_string() + " vs " + b.shape_string());
  }
}

}  // namespace

Tensor softmax_forward(const Tensor& scores, double temperature) {
  if (temperature <= 0.0) {
    throw std::invalid_argument("softmax temperature must be positive");
  }
  if (scores.size() < 1) {
    throw std::invalid_argument("softmax needs at least one score");
  }
  Tensor out(scores.shape());
  kernels::softmax_rows_serial(scores.data(), out.data(), 1, scores.size(),
                               temperature);
  return out;
}

Tensor softmax_backward(const Tensor& scores, const Tensor& upstream,
                        const GradientRuleSet& rules,
                        double forward_temperature) {
  require_same_shape(scores, upstream, "softmax_backward");
  rules.validate();
  double tau = forward_temperature;
  double backward_tau = tau;
  if (rules.softmax == SoftmaxRule::kTemperatureAdjusted) {
    backward_tau = tau * rules.tsg_temperature;
  }
  Tensor w = softmax_forward(scores, backward_tau);

  int64_t n = scores.size();
  double dot = 0.0;
  for (int64_t i = 0; i < n; ++i) dot += upstream[i] * w[i];

  Tensor grads(scores.shape());
  double inv_tau = 1.0 / tau;
  for (int64_t i = 0; i < n; ++i) {
    grads[i] = inv_tau * w[i] * (upstream[i] - dot);
  }
  return grads;
}

LayerNormResult layernorm_forward(const Tensor& x, double eps) {
  if (x.size() < 2) {
    throw std::invalid_argument("layernorm needs at least two entries");
  }
  LayerNormResult r{Tensor(x.shape()), 0.0};
  kernels::layernorm_rows_serial(x.data(), r.y.data(), &r.sigma, 1, x.size(),
                                 eps);
  return r;
}

Tensor layernorm_backward(const Tensor& x, double sigma,
                          const Tensor& upstream, LayerNormRule rule) {
  require_same_shape(x, upstream, "layernorm_backward");
  int64_t n = x.size();
  double inv_n = 1.0 / static_cast<double>(n);
  double g_mean = 0.0;
  for (int64_t i = 0; i < n; ++i) g_mean += upstream[i];
  g_mean *= inv_n;

  Tensor out(x.shape());
  double inv_sigma = 1.0 / sigma;
  if (rule == LayerNormRule::kFreeze) {
    for (int64_t i = 0; i < n; ++i) {
      out[i] = (upstream[i] - g_mean) * inv_sigma;
    }
    return out;
  }
  // Standard: rebuild y from the saved forward values, then
  // dx = (g - mean(g) - y * mean(g .* y)) / sigma.
  double x_mean = 0.0;
  for (int64_t i = 0; i < n; ++i) x_mean += x[i];
  x_mean *= inv_n;
  double gy_mean = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    gy_mean += upstream[i] * (x[i] - x_mean) * inv_sigma;
  }
  gy_mean *= inv_n;
  for (int64_t i = 0; i < n; ++i) {
    double y = (x[i] - x_mean) * inv_sigma;
    out[i] = (upstream[i] - g_mean - y * gy_mean) * inv_sigma;
  }
  return out;
}

std::pair<Tensor, Tensor> mul_backward(const Tensor& a, const Tensor& b,
                                       const Tensor& upstream,
                                       MultiplyRule rule) {
  require_same_shape(a, b, "mul_backward");
  require_same_shape(a, upstream, "mul_backward");
  Tensor da(a.shape());
  Tensor db(b.shape());
  kernels::mul(upstream.data(), b.data(), da.data(), a.size());
  kernels::mul(upstream.data(), a.data(), db.data(), a.size());
  if (rule == MultiplyRule::kGradNorm) {
    kernels::scale(da.data(), 0.5, da.data(), da.size());
    kernels::scale(db.data(), 0.5, db.data(), db.size());
  }
  return {std::move(da), std::move(db)};
}

std::pair<Tensor, Tensor> matmul_backward(const Tensor& a, const Tensor& b,
                                          const Tensor& upstream,
                                          MultiplyRule rule) {
  if (a.rank() != 2 || b.rank() != 2 || upstream.rank() != 2 ||
      a.cols() != b.rows() || upstream.rows() != a.rows() ||
      upstream.cols() != b.cols()) {
    throw std::invalid_argument("matmul_backward: shape mismatch");
  }
  int64_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor da({m, k});
  Tensor db({k, n});
  kernels::matmul_bt(upstream.data(), b.data(), da.data(), m, n, k);
  kernels::matmul_ta(a.data(), upstream.data(), db.data(), m, k, n);
  if (rule == MultiplyRule::kGradNorm) {
    kernels::scale(da.data(), 0.5, da.data(), da.size());
    kernels::scale(db.data(), 0.5, db.data(), db.size());
  }
  return {std::move(da), std::move(db)};
}

Tensor finite_difference(const std::function<double(const Tensor&)>& f,
                         const Tensor& x, double h) {
  if (h <= 0.0) {
    throw std::invalid_argument("finite_difference step must be positive");
  }
  Tensor grads(x.shape());
  int64_t n = x.size();
#pragma omp parallel for schedule(dynamic) if (kernels::parallel_enabled())
  for (int64_t i = 0; i < n; ++i) {
    Tensor xp = x;
    xp[i] = x[i] + h;
    double fp = f(xp);
    xp[i] = x[i] - h;
    double fm = f(xp);
    grads[i] = (fp - fm) / (2.0 * h);
  }
  return grads;
}

}  // namespace gim
