// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "gim/rules.hpp"
#include "gim/tensor.hpp"

namespace gim {

using TensorId = int32_t;

enum class OpKind : uint8_t {
  kLeaf,
  kMatMul,     // C = A * B
  kMatMulBT,   // C = A * B^T
  kAdd,        // elementwise
  kMul,        // elementwise
  kMulRowVec,  // out[i,j] = a[i,j] * v[j]
  kScale,      // out = a * c
  kSilu,
  kSoftmaxRows,    // row-wise, forward temperature stored on the node
  kLayerNormRows,  // row-wise, per-row sigma saved on the node
  kGather,         // rows of a table selected by integer ids
  kSelect,         // scalar out = a[row, col]
};

struct TapeNode {
  OpKind kind = OpKind::kLeaf;
  TensorId a = -1;
  TensorId b = -1;
  TensorId out = -1;
  // Grad-norm applies only where the node is a multiplicative interaction
  // site (query-key, attention-value, MLP gate-projection).
  bool interaction = false;
  double scale = 1.0;        // kScale
  double temperature = 1.0;  // kSoftmaxRows forward temperature
  double eps = 0.0;          // kLayerNormRows
  std::vector<double> sigma;     // kLayerNormRows per-row sigma
  std::vector<int64_t> indices;  // kGather ids / kSelect {row, col}
};

/// Gradients keyed by tensor id, as produced by backward().
class Gradients {
 public:
  explicit Gradients(size_t n) : grads_(n), present_(n, false) {}

  const Tensor& at(TensorId id) const;
  bool has(TensorId id) const { return present_[static_cast<size_t>(id)]; }

  Tensor& slot(TensorId id, const std::vector<int64_t>& shape);

 private:
  std::vector<Tensor> grads_;
  std::vector<bool> present_;
};

/// Append-only record of one forward computation. Node order is the
/// evaluation order, so inputs always precede their consumers; backward
/// visits nodes exactly once in reverse, and fan-out gradients accumulate
/// in that fixed order, which keeps results bit-deterministic.
class Tape {
 public:
  TensorId leaf(Tensor value);

  TensorId matmul(TensorId a, TensorId b, bool interaction = false);
  TensorId matmul_bt(TensorId a, TensorId b, bool interaction = false);
  TensorId add(TensorId a, TensorId b);
  TensorId mul(TensorId a, TensorId b, bool interaction = false);
  TensorId mul_row_vec(TensorId a, TensorId v);
  TensorId scale(TensorId a, double c);
  TensorId silu(TensorId a);
  TensorId softmax_rows(TensorId a, double temperature);
  TensorId layernorm_rows(TensorId a, double eps);
  TensorId gather(TensorId table, std::vector<int64_t> ids);
  TensorId select(TensorId a, int64_t row, int64_t col);

  const Tensor& value(TensorId id) const {
    return values_[static_cast<size_t>(id)];
  }
  size_t num_tensors() const { return values_.size(); }
  size_t num_nodes() const { return nodes_.size(); }
  const std::vector<TapeNode>& nodes() const { return nodes_; }

  // Per-row sigmas saved by a layernorm node, looked up by its output id.
  const std::vector<double>& layernorm_sigma(TensorId out) const;

 private:
  friend Gradients backward(const Tape& tape, TensorId seed,
                            const GradientRuleSet& rules);

  TensorId push_value(Tensor value);
  TapeNode& push_node(OpKind kind, TensorId a, TensorId b, TensorId out);

  std::vector<Tensor> values_;
  std::vector<TapeNode> nodes_;
};

/// Reverse sweep from a scalar seed. With all-standard rules the result is
/// the exact gradient of the seed with respect to every tape tensor.
Gradients backward(const Tape& tape, TensorId seed,
                   const GradientRuleSet& rules);

}  // namespace gim
