// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace gim::kernels {

// Runtime switch for the OpenMP paths. The parallel kernels partition work
// by output element with a fixed per-element loop order, so enabling them
// never changes results bitwise; the serial twins below stay as the
// reference the tests and the benchmark compare against.
void set_parallel(bool enabled);
bool parallel_enabled();

// Minimum number of flops before a kernel bothers forking threads.
inline constexpr int64_t kParallelCutoff = 16384;

// C[m,n] = A[m,k] * B[k,n]
void matmul(const double* a, const double* b, double* c, int64_t m, int64_t k,
            int64_t n);
void matmul_serial(const double* a, const double* b, double* c, int64_t m,
                   int64_t k, int64_t n);

// C[m,n] = A[m,k] * B[n,k]^T
void matmul_bt(const double* a, const double* b, double* c, int64_t m,
               int64_t k, int64_t n);
void matmul_bt_serial(const double* a, const double* b, double* c, int64_t m,
                      int64_t k, int64_t n);

// C[k,n] = A[m,k]^T * B[m,n]
void matmul_ta(const double* a, const double* b, double* c, int64_t m,
               int64_t k, int64_t n);
void matmul_ta_serial(const double* a, const double* b, double* c, int64_t m,
                      int64_t k, int64_t n);

// out[i] = a[i] + b[i] / a[i] * b[i] / a[i] * s
void add(const double* a, const double* b, double* out, int64_t n);
void add_serial(const double* a, const double* b, double* out, int64_t n);
void mul(const double* a, const double* b, double* out, int64_t n);
void mul_serial(const double* a, const double* b, double* out, int64_t n);
void scale(const double* a, double s, double* out, int64_t n);
void scale_serial(const double* a, double s, double* out, int64_t n);

// out[i] = a[i] * sigmoid(a[i])
void silu(const double* a, double* out, int64_t n);
void silu_serial(const double* a, double* out, int64_t n);
// out[i] = g[i] * d silu / dx at a[i]
void silu_grad(const double* a, const double* g, double* out, int64_t n);
void silu_grad_serial(const double* a, const double* g, double* out,
                      int64_t n);

// Row-wise softmax with temperature, stable (max-subtracted) form.
void softmax_rows(const double* in, double* out, int64_t rows, int64_t cols,
                  double temperature);
void softmax_rows_serial(const double* in, double* out, int64_t rows,
                         int64_t cols, double temperature);

// Row-wise layernorm; sigma[r] receives sqrt(var + eps) per row.
void layernorm_rows(const double* in, double* out, double* sigma, int64_t rows,
                    int64_t cols, double eps);
void layernorm_rows_serial(const double* in, double* out, double* sigma,
                           int64_t rows, int64_t cols, double eps);

}  // namespace gim::kernels
