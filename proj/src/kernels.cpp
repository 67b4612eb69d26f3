// SPDX-License-Identifier: Apache-2.0
#include "gim/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace gim::kernels {

namespace {

std::atomic<bool> g_parallel{true};

inline bool go_parallel(int64_t work) {
  return g_parallel.load(std::memory_order_relaxed) && work >= kParallelCutoff;
}

inline double row_max_scaled(const double* p, int64_t n, double inv_tau) {
  double m = p[0] * inv_tau;
  for (int64_t i = 1; i < n; ++i) m = std::max(m, p[i] * inv_tau);
  return m;
}

inline void softmax_row(const double* in, double* out, int64_t n,
                        double inv_tau) {
  double m = row_max_scaled(in, n, inv_tau);
  double sum = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double e = std::exp(in[i] * inv_tau - m);
    out[i] = e;
    sum += e;
  }
  double inv = 1.0 / sum;
  for (int64_t i = 0; i < n; ++i) out[i] *= inv;
}

inline void layernorm_row(const double* in, double* out, double* sigma,
                          int64_t n, double eps) {
  double mean = 0.0;
  for (int64_t i = 0; i < n; ++i) mean += in[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double d = in[i] - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  double s = std::sqrt(var + eps);
  double inv = 1.0 / s;
  for (int64_t i = 0; i < n; ++i) out[i] = (in[i] - mean) * inv;
  *sigma = s;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void set_parallel(bool enabled) {
  g_parallel.store(enabled, std::memory_order_relaxed);
}

bool parallel_enabled() {
  return g_parallel.load(std::memory_order_relaxed);
}

void matmul_serial(const double* a, const double* b, double* c, int64_t m,
                   int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    std::fill(ci, ci + n, 0.0);
    const double* ai = a + i * k;
    for (int64_t p = 0; p < k; ++p) {
      double av = ai[p];
      const double* bp = b + p * n;
      for (int64_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void matmul(const double* a, const double* b, double* c, int64_t m, int64_t k,
            int64_t n) {
#pragma omp parallel for schedule(static) if (go_parallel(m* k* n))
  for (int64_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    std::fill(ci, ci + n, 0.0);
    const double* ai = a + i * k;
    for (int64_t p = 0; p < k; ++p) {
      double av = ai[p];
      const double* bp = b + p * n;
      for (int64_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void matmul_bt_serial(const double* a, const double* b, double* c, int64_t m,
                      int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (int64_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] = acc;
    }
  }
}

void matmul_bt(const double* a, const double* b, double* c, int64_t m,
               int64_t k, int64_t n) {
#pragma omp parallel for schedule(static) if (go_parallel(m* k* n))
  for (int64_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (int64_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] = acc;
    }
  }
}

void matmul_ta_serial(const double* a, const double* b, double* c, int64_t m,
                      int64_t k, int64_t n) {
  for (int64_t r = 0; r < k; ++r) {
    double* cr = c + r * n;
    std::fill(cr, cr + n, 0.0);
    for (int64_t i = 0; i < m; ++i) {
      double av = a[i * k + r];
      const double* bi = b + i * n;
      for (int64_t j = 0; j < n; ++j) cr[j] += av * bi[j];
    }
  }
}

void matmul_ta(const double* a, const double* b, double* c, int64_t m,
               int64_t k, int64_t n) {
#pragma omp parallel for schedule(static) if (go_parallel(m* k* n))
  for (int64_t r = 0; r < k; ++r) {
    double* cr = c + r * n;
    std::fill(cr, cr + n, 0.0);
    for (int64_t i = 0; i < m; ++i) {
      double av = a[i * k + r];
      const double* bi = b + i * n;
      for (int64_t j = 0; j < n; ++j) cr[j] += av * bi[j];
    }
  }
}

void add_serial(const double* a, const double* b, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void add(const double* a, const double* b, double* out, int64_t n) {
#pragma omp parallel for schedule(static) if (go_parallel(n))
  for (int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void mul_serial(const double* a, const double* b, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void mul(const double* a, const double* b, double* out, int64_t n) {
#pragma omp parallel for schedule(static) if (go_parallel(n))
  for (int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_serial(const double* a, double s, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

void scale(const double* a, double s, double* out, int64_t n) {
#pragma omp parallel for schedule(static) if (go_parallel(n))
  for (int64_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

void silu_serial(const double* a, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = a[i] * sigmoid(a[i]);
}

void silu(const double* a, double* out, int64_t n) {
#pragma omp parallel for schedule(static) if (go_parallel(n * 4))
  for (int64_t i = 0; i < n; ++i) out[i] = a[i] * sigmoid(a[i]);
}

void silu_grad_serial(const double* a, const double* g, double* out,
                      int64_t n) {
  for (int64_t i = 0; i < n; ++i) {
    double s = sigmoid(a[i]);
    out[i] = g[i] * (s * (1.0 + a[i] * (1.0 - s)));
  }
}

void silu_grad(const double* a, const double* g, double* out, int64_t n) {
#pragma omp parallel for schedule(static) if (go_parallel(n * 4))
  for (int64_t i = 0; i < n; ++i) {
    double s = sigmoid(a[i]);
    out[i] = g[i] * (s * (1.0 + a[i] * (1.0 - s)));
  }
}

void softmax_rows_serial(const double* in, double* out, int64_t rows,
                         int64_t cols, double temperature) {
  double inv_tau = 1.0 / temperature;
  for (int64_t r = 0; r < rows; ++r) {
    softmax_row(in + r * cols, out + r * cols, cols, inv_tau);
  }
}

void softmax_rows(const double* in, double* out, int64_t rows, int64_t cols,
                  double temperature) {
  double inv_tau = 1.0 / temperature;
#pragma omp parallel for schedule(static) if (go_parallel(rows * cols * 8))
  for (int64_t r = 0; r < rows; ++r) {
    softmax_row(in + r * cols, out + r * cols, cols, inv_tau);
  }
}

void layernorm_rows_serial(const double* in, double* out, double* sigma,
                           int64_t rows, int64_t cols, double eps) {
  for (int64_t r = 0; r < rows; ++r) {
    layernorm_row(in + r * cols, out + r * cols, sigma + r, cols, eps);
  }
}

void layernorm_rows(const double* in, double* out, double* sigma, int64_t rows,
                    int64_t cols, double eps) {
#pragma omp parallel for schedule(static) if (go_parallel(rows * cols * 4))
  for (int64_t r = 0; r < rows; ++r) {
    layernorm_row(in + r * cols, out + r * cols, sigma + r, cols, eps);
  }
}

}  // namespace gim::kernels
