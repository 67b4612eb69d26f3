// SPDX-License-Identifier: Apache-2.0
#include "gim/tape.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "gim/kernels.hpp"
#include "gim/ops.hpp"

namespace gim {

const Tensor& Gradients::at(TensorId id) const {
  if (!present_[static_cast<size_t>(id)]) {
    throw std::out_of_range("no gradient recorded for tensor id " +
                            std::to_string(id));
  }
  return grads_[static_cast<size_t>(id)];
}

Tensor& Gradients::slot(TensorId id, const std::vector<int64_t>& shape) {
  auto idx = static_cast<size_t>(id);
  if (!present_[idx]) {
    grads_[idx] = Tensor(shape);
    present_[idx] = true;
  }
  return grads_[idx];
}

TensorId Tape::push_value(Tensor value) {
  values_.push_back(std::move(value));
  return static_cast<TensorId>(values_.size() - 1);
}

TapeNode& Tape::push_node(OpKind kind, TensorId a, TensorId b, TensorId out) {
  TapeNode node;
  node.kind = kind;
  node.a = a;
  node.b = b;
  node.out = out;
  nodes_.push_back(std::move(node));
  return nodes_.back();
}

TensorId Tape::leaf(Tensor value) { return push_value(std::move(value)); }

TensorId Tape::matmul(TensorId a, TensorId b, bool interaction) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.rows()) {
    throw std::invalid_argument("matmul: incompatible shapes " +
                                ta.shape_string() + " x " + tb.shape_string());
  }
  Tensor out({ta.rows(), tb.cols()});
  kernels::matmul(ta.data(), tb.data(), out.data(), ta.rows(), ta.cols(),
                  tb.cols());
  TensorId id = push_value(std::move(out));
  push_node(OpKind::kMatMul, a, b, id).interaction = interaction;
  return id;
}

TensorId Tape::matmul_bt(TensorId a, TensorId b, bool interaction) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.cols()) {
    throw std::invalid_argument("matmul_bt: incompatible shapes " +
                                ta.shape_string() + " x " + tb.shape_string());
  }
  Tensor out({ta.rows(), tb.rows()});
  kernels::matmul_bt(ta.data(), tb.data(), out.data(), ta.rows(), ta.cols(),
                     tb.rows());
  TensorId id = push_value(std::move(out));
  push_node(OpKind::kMatMulBT, a, b, id).interaction = interaction;
  return id;
}

TensorId Tape::add(TensorId a, TensorId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) {
    throw std::invalid_argument("add: shape mismatch");
  }
  Tensor out(ta.shape());
  kernels::add(ta.data(), tb.data(), out.data(), ta.size());
  TensorId id = push_value(std::move(out));
  push_node(OpKind::kAdd, a, b, id);
  return id;
}

TensorId Tape::mul(TensorId a, TensorId b, bool interaction) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) {
    throw std::invalid_argument("mul: shape mismatch");
  }
  Tensor out(ta.shape());
  kernels::mul(ta.data(), tb.data(), out.data(), ta.size());
  TensorId id = push_value(std::move(out));
  push_node(OpKind::kMul, a, b, id).interaction = interaction;
  return id;
}

TensorId Tape::mul_row_vec(TensorId a, TensorId v) {
  const Tensor& ta = value(a);
  const Tensor& tv = value(v);
  if (ta.rank() != 2 || tv.size() != ta.cols()) {
    throw std::invalid_argument("mul_row_vec: shape mismatch");
  }
  Tensor out(ta.shape());
  for (int64_t i = 0; i < ta.rows(); ++i) {
    kernels::mul_serial(ta.row(i).data(), tv.data(), out.row(i).data(),
                        ta.cols());
  }
  TensorId id = push_value(std::move(out));
  push_node(OpKind::kMulRowVec, a, v, id);
  return id;
}

TensorId Tape::scale(TensorId a, double c) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  kernels::scale(ta.data(), c, out.data(), ta.size());
  TensorId id = push_value(std::move(out));
  push_node(OpKind::kScale, a, -1, id).scale = c;
  return id;
}

TensorId Tape::silu(TensorId a) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  kernels::silu(ta.data(), out.data(), ta.size());
  TensorId id = push_value(std::move(out));
  push_node(OpKind::kSilu, a, -1, id);
  return id;
}

TensorId Tape::softmax_rows(TensorId a, double temperature) {
  if (temperature <= 0.0) {
    throw std::invalid_argument("softmax temperature must be positive");
  }
  const Tensor& ta = value(a);
  if (ta.rank() != 2) {
    throw std::invalid_argument("softmax_rows expects a rank-2 tensor");
  }
  Tensor out(ta.shape());
  kernels::softmax_rows(ta.data(), out.data(), ta.rows(), ta.cols(),
                        temperature);
  TensorId id = push_value(std::move(out));
  push_node(OpKind::kSoftmaxRows, a, -1, id).temperature = temperature;
  return id;
}

TensorId Tape::layernorm_rows(TensorId a, double eps) {
  const Tensor& ta = value(a);
  if (ta.rank() != 2 || ta.cols() < 2) {
    throw std::invalid_argument(
        "layernorm_rows expects a rank-2 tensor with >= 2 columns");
  }
  Tensor out(ta.shape());
  std::vector<double> sigma(static_cast<size_t>(ta.rows()));
  kernels::layernorm_rows(ta.data(), out.data(), sigma.data(), ta.rows(),
                          ta.cols(), eps);
  TensorId id = push_value(std::move(out));
  TapeNode& node = push_node(OpKind::kLayerNormRows, a, -1, id);
  node.eps = eps;
  node.sigma = std::move(sigma);
  return id;
}

TensorId Tape::gather(TensorId table, std::vector<int64_t> ids) {
  const Tensor& tt = value(table);
  if (tt.rank() != 2) {
    throw std::invalid_argument("gather expects a rank-2 table");
  }
  for (int64_t ix : ids) {
    if (ix < 0 || ix >= tt.rows()) {
      throw std::invalid_argument("gather index out of range: " +
                                  std::to_string(ix));
    }
  }
  Tensor out({static_cast<int64_t>(ids.size()), tt.cols()});
  for (size_t i = 0; i < ids.size(); ++i) {
    auto src = tt.row(ids[i]);
    auto dst = out.row(static_cast<int64_t>(i));
    std::copy(src.begin(), src.end(), dst.begin());
  }
  TensorId id = push_value(std::move(out));
  push_node(OpKind::kGather, table, -1, id).indices = std::move(ids);
  return id;
}

TensorId Tape::select(TensorId a, int64_t row, int64_t col) {
  const Tensor& ta = value(a);
  if (ta.rank() != 2 || row < 0 || row >= ta.rows() || col < 0 ||
      col >= ta.cols()) {
    throw std::invalid_argument("select: index out of range");
  }
  TensorId id = push_value(Tensor::scalar(ta.at(row, col)));
  push_node(OpKind::kSelect, a, -1, id).indices = {row, col};
  return id;
}

const std::vector<double>& Tape::layernorm_sigma(TensorId out) const {
  for (const TapeNode& node : nodes_) {
    if (node.out == out && node.kind == OpKind::kLayerNormRows) {
      return node.sigma;
    }
  }
  throw std::out_of_range("tensor id is not a layernorm output");
}

namespace {

// Row-wise softmax backward honoring the rule set; scores are the node's
// saved inputs, upstream the gradient at the weights.
void softmax_rows_backward(const Tensor& scores, const Tensor& upstream,
                           double temperature, const GradientRuleSet& rules,
                           Tensor& out) {
  int64_t rows = scores.rows();
  int64_t cols = scores.cols();
  for (int64_t r = 0; r < rows; ++r) {
    Tensor score_row(std::vector<int64_t>{cols},
                     std::vector<double>(scores.row(r).begin(),
                                         scores.row(r).end()));
    Tensor up_row(std::vector<int64_t>{cols},
                  std::vector<double>(upstream.row(r).begin(),
                                      upstream.row(r).end()));
    Tensor g = softmax_backward(score_row, up_row, rules, temperature);
    std::copy(g.data(), g.data() + cols, out.row(r).begin());
  }
}

}  // namespace

Gradients backward(const Tape& tape, TensorId seed,
                   const GradientRuleSet& rules) {
  rules.validate();
  if (seed < 0 || static_cast<size_t>(seed) >= tape.num_tensors()) {
    throw std::invalid_argument("backward: unknown seed tensor");
  }
  if (!tape.value(seed).is_scalar()) {
    throw std::invalid_argument("backward: seed must be a scalar");
  }

  Gradients grads(tape.num_tensors());
  grads.slot(seed, tape.value(seed).shape())[0] = 1.0;

  const auto& nodes = tape.nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    const TapeNode& node = *it;
    if (!grads.has(node.out)) continue;
    const Tensor& g = grads.at(node.out);
    const Tensor& va = tape.value(node.a);

    switch (node.kind) {
      case OpKind::kMatMul: {
        const Tensor& vb = tape.value(node.b);
        MultiplyRule rule = node.interaction ? rules.multiply
                                             : MultiplyRule::kStandard;
        auto [da, db] = matmul_backward(va, vb, g, rule);
        Tensor& sa = grads.slot(node.a, va.shape());
        kernels::add(sa.data(), da.data(), sa.data(), sa.size());
        Tensor& sb = grads.slot(node.b, vb.shape());
        kernels::add(sb.data(), db.data(), sb.data(), sb.size());
        break;
      }
      case OpKind::kMatMulBT: {
        // C = A * B^T: dA = G * B, dB = G^T * A.
        const Tensor& vb = tape.value(node.b);
        int64_t m = va.rows(), k = va.cols(), n = vb.rows();
        Tensor da({m, k});
        kernels::matmul(g.data(), vb.data(), da.data(), m, n, k);
        Tensor db({n, k});
        kernels::matmul_ta(g.data(), va.data(), db.data(), m, n, k);
        if (node.interaction && rules.multiply == MultiplyRule::kGradNorm) {
          kernels::scale(da.data(), 0.5, da.data(), da.size());
          kernels::scale(db.data(), 0.5, db.data(), db.size());
        }
        Tensor& sa = grads.slot(node.a, va.shape());
        kernels::add(sa.data(), da.data(), sa.data(), sa.size());
        Tensor& sb = grads.slot(node.b, vb.shape());
        kernels::add(sb.data(), db.data(), sb.data(), sb.size());
        break;
      }
      case OpKind::kAdd: {
        const Tensor& vb = tape.value(node.b);
        Tensor& sa = grads.slot(node.a, va.shape());
        kernels::add(sa.data(), g.data(), sa.data(), sa.size());
        Tensor& sb = grads.slot(node.b, vb.shape());
        kernels::add(sb.data(), g.data(), sb.data(), sb.size());
        break;
      }
      case OpKind::kMul: {
        const Tensor& vb = tape.value(node.b);
        MultiplyRule rule = node.interaction ? rules.multiply
                                             : MultiplyRule::kStandard;
        auto [da, db] = mul_backward(va, vb, g, rule);
        Tensor& sa = grads.slot(node.a, va.shape());
        kernels::add(sa.data(), da.data(), sa.data(), sa.size());
        Tensor& sb = grads.slot(node.b, vb.shape());
        kernels::add(sb.data(), db.data(), sb.data(), sb.size());
        break;
      }
      case OpKind::kMulRowVec: {
        const Tensor& vv = tape.value(node.b);
        Tensor& sa = grads.slot(node.a, va.shape());
        Tensor& sv = grads.slot(node.b, vv.shape());
        for (int64_t i = 0; i < va.rows(); ++i) {
          auto grow = g.row(i);
          auto arow = va.row(i);
          auto srow = sa.row(i);
          for (int64_t j = 0; j < va.cols(); ++j) {
            srow[j] += grow[j] * vv[j];
            sv[j] += grow[j] * arow[j];
          }
        }
        break;
      }
      case OpKind::kScale: {
        Tensor& sa = grads.slot(node.a, va.shape());
        for (int64_t i = 0; i < sa.size(); ++i) sa[i] += g[i] * node.scale;
        break;
      }
      case OpKind::kSilu: {
        Tensor dg(va.shape());
        kernels::silu_grad(va.data(), g.data(), dg.data(), va.size());
        Tensor& sa = grads.slot(node.a, va.shape());
        kernels::add(sa.data(), dg.data(), sa.data(), sa.size());
        break;
      }
      case OpKind::kSoftmaxRows: {
        Tensor dg(va.shape());
        softmax_rows_backward(va, g, node.temperature, rules, dg);
        Tensor& sa = grads.slot(node.a, va.shape());
        kernels::add(sa.data(), dg.data(), sa.data(), sa.size());
        break;
      }
      case OpKind::kLayerNormRows: {
        Tensor& sa = grads.slot(node.a, va.shape());
        int64_t cols = va.cols();
        for (int64_t r = 0; r < va.rows(); ++r) {
          Tensor x_row(std::vector<int64_t>{cols},
                       std::vector<double>(va.row(r).begin(),
                                           va.row(r).end()));
          Tensor up_row(std::vector<int64_t>{cols},
                        std::vector<double>(g.row(r).begin(),
                                            g.row(r).end()));
          Tensor dx = layernorm_backward(
              x_row, node.sigma[static_cast<size_t>(r)], up_row,
              rules.layernorm);
          auto srow = sa.row(r);
          for (int64_t j = 0; j < cols; ++j) srow[j] += dx[j];
        }
        break;
      }
      case OpKind::kGather: {
        Tensor& sa = grads.slot(node.a, va.shape());
        for (size_t i = 0; i < node.indices.size(); ++i) {
          auto grow = g.row(static_cast<int64_t>(i));
          auto srow = sa.row(node.indices[i]);
          for (int64_t j = 0; j < va.cols(); ++j) srow[j] += grow[j];
        }
        break;
      }
      case OpKind::kSelect: {
        Tensor& sa = grads.slot(node.a, va.shape());
        sa.at(node.indices[0], node.indices[1]) += g[0];
        break;
      }
      case OpKind::kLeaf:
        throw std::runtime_error("backward: malformed tape node");
    }
  }
  return grads;
}

}  // namespace gim
