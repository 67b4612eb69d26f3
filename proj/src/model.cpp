// SPDX-License-Identifier: Apache-2.0
#include "gim/model.hpp"

#include <cmath>
#include <stdexcept>

#include "gim/rng.hpp"

namespace gim {

namespace {

constexpr double kMaskValue = -1e30;

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

}  // namespace

void ModelConfig::validate() const {
  require(vocab_size >= 1 && d_model >= 1 && n_heads >= 1 && d_head >= 1 &&
              d_mlp >= 1 && max_seq_len >= 1,
          "model dimensions must be >= 1");
  require(n_layers >= 0, "n_layers must be >= 0");
  require(d_model == n_heads * d_head, "d_model must equal n_heads * d_head");
  require(eps_ln > 0.0, "eps_ln must be positive");
  require(!use_final_ln || d_model >= 2,
          "final layernorm needs d_model >= 2");
}

const Tensor& Weights::get(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) {
    throw std::invalid_argument("missing weight tensor: " + name);
  }
  return it->second;
}

Tensor& Weights::get(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) {
    throw std::invalid_argument("missing weight tensor: " + name);
  }
  return it->second;
}

std::vector<std::string> weight_names(const ModelConfig& config) {
  std::vector<std::string> names = {"tok_embed", "pos_embed"};
  for (int64_t l = 0; l < config.n_layers; ++l) {
    std::string p = "layers." + std::to_string(l) + ".";
    names.push_back(p + "ln1.gain");
    names.push_back(p + "attn.wq");
    names.push_back(p + "attn.wk");
    names.push_back(p + "attn.wv");
    names.push_back(p + "attn.wo");
    names.push_back(p + "ln2.gain");
    names.push_back(p + "mlp.w_gate");
    names.push_back(p + "mlp.w_up");
    names.push_back(p + "mlp.w_down");
  }
  if (config.use_final_ln) names.push_back("ln_f.gain");
  names.push_back("unembed");
  return names;
}

std::vector<int64_t> weight_shape(const ModelConfig& c,
                                  const std::string& name) {
  auto suffix = [&name](const std::string& s) {
    return name.size() >= s.size() &&
           name.compare(name.size() - s.size(), s.size(), s) == 0;
  };
  if (name == "tok_embed") return {c.vocab_size, c.d_model};
  if (name == "pos_embed") return {c.max_seq_len, c.d_model};
  if (name == "unembed") return {c.d_model, c.vocab_size};
  if (suffix(".gain") || name == "ln_f.gain") return {c.d_model};
  if (suffix("attn.wq") || suffix("attn.wk") || suffix("attn.wv")) {
    return {c.n_heads, c.d_model, c.d_head};
  }
  if (suffix("attn.wo")) return {c.n_heads, c.d_head, c.d_model};
  if (suffix("mlp.w_gate") || suffix("mlp.w_up")) return {c.d_model, c.d_mlp};
  if (suffix("mlp.w_down")) return {c.d_mlp, c.d_model};
  throw std::invalid_argument("unknown weight tensor name: " + name);
}

Weights init_random(const ModelConfig& config, uint64_t seed) {
  config.validate();
  Rng rng(sub_seed(seed, "weights"));
  double scale = 1.0 / std::sqrt(static_cast<double>(config.d_model));
  Weights w;
  w.config = config;
  for (const std::string& name : weight_names(config)) {
    Tensor t(weight_shape(config, name));
    if (name.ends_with(".gain")) {
      for (int64_t i = 0; i < t.size(); ++i) t[i] = 1.0;
    } else {
      for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.next_normal() * scale;
    }
    w.tensors.emplace(name, std::move(t));
  }
  return w;
}

namespace {

// Contiguous [d_model, d_head] (or [d_head, d_model]) slice of a per-head
// weight stack.
Tensor head_slice(const Tensor& stacked, int64_t head) {
  int64_t rows = stacked.dim(1);
  int64_t cols = stacked.dim(2);
  const double* src = stacked.data() + head * rows * cols;
  return Tensor({rows, cols},
                std::vector<double>(src, src + rows * cols));
}

Tensor causal_mask(int64_t n) {
  Tensor mask({n, n});
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = i + 1; j < n; ++j) mask.at(i, j) = kMaskValue;
  }
  return mask;
}

// Shared block builder: runs layers [start_layer, n_layers), the final
// layernorm and the unembedding, recording everything on trace.tape.
void run_blocks(const Weights& weights, ForwardTrace& trace, TensorId x) {
  const ModelConfig& c = weights.config;
  Tape& tape = trace.tape;
  int64_t n = trace.seq_len;
  double score_scale = 1.0 / std::sqrt(static_cast<double>(c.d_head));

  TensorId mask = tape.leaf(causal_mask(n));

  for (int64_t l = trace.start_layer; l < c.n_layers; ++l) {
    std::string p = "layers." + std::to_string(l) + ".";
    LayerTrace layer;
    layer.residual_in = x;

    TensorId normed = tape.layernorm_rows(x, c.eps_ln);
    TensorId ln1 = tape.mul_row_vec(normed, tape.leaf(weights.get(p + "ln1.gain")));
    layer.ln1_out = normed;

    const Tensor& wq = weights.get(p + "attn.wq");
    const Tensor& wk = weights.get(p + "attn.wk");
    const Tensor& wv = weights.get(p + "attn.wv");
    const Tensor& wo = weights.get(p + "attn.wo");

    TensorId attn_sum = -1;
    for (int64_t h = 0; h < c.n_heads; ++h) {
      HeadTrace head;
      TensorId q = tape.matmul(ln1, tape.leaf(head_slice(wq, h)));
      TensorId k = tape.matmul(ln1, tape.leaf(head_slice(wk, h)));
      TensorId v = tape.matmul(ln1, tape.leaf(head_slice(wv, h)));
      head.values = v;
      // Query-key contraction is a grad-norm interaction site.
      TensorId raw = tape.matmul_bt(q, k, /*interaction=*/true);
      TensorId scaled = tape.scale(raw, score_scale);
      TensorId masked = tape.add(scaled, mask);
      head.scores = masked;
      TensorId s = tape.softmax_rows(masked, 1.0);
      head.weights = s;
      // Attention-value contraction is a grad-norm interaction site.
      TensorId o = tape.matmul(s, v, /*interaction=*/true);
      head.output = o;
      TensorId proj = tape.matmul(o, tape.leaf(head_slice(wo, h)));
      attn_sum = (attn_sum < 0) ? proj : tape.add(attn_sum, proj);
      layer.heads.push_back(head);
    }
    layer.attn_out = attn_sum;
    TensorId mid = tape.add(x, attn_sum);
    layer.residual_mid = mid;

    TensorId normed2 = tape.layernorm_rows(mid, c.eps_ln);
    TensorId ln2 = tape.mul_row_vec(normed2, tape.leaf(weights.get(p + "ln2.gain")));

    TensorId gate = tape.matmul(ln2, tape.leaf(weights.get(p + "mlp.w_gate")));
    TensorId gate_act = tape.silu(gate);
    TensorId up = tape.matmul(ln2, tape.leaf(weights.get(p + "mlp.w_up")));
    // Gate-projection product is a grad-norm interaction site.
    TensorId hidden = tape.mul(gate_act, up, /*interaction=*/true);
    TensorId mlp_out = tape.matmul(hidden, tape.leaf(weights.get(p + "mlp.w_down")));
    layer.mlp_gate = gate;
    layer.mlp_gate_act = gate_act;
    layer.mlp_up = up;
    layer.mlp_hidden = hidden;
    layer.mlp_out = mlp_out;

    x = tape.add(mid, mlp_out);
    layer.residual_out = x;
    trace.layers.push_back(std::move(layer));
  }

  trace.final_residual = x;
  TensorId pre_unembed = x;
  if (c.use_final_ln) {
    TensorId normed = tape.layernorm_rows(x, c.eps_ln);
    pre_unembed = tape.mul_row_vec(normed, tape.leaf(weights.get("ln_f.gain")));
  }
  trace.logits = tape.matmul(pre_unembed, tape.leaf(weights.get("unembed")));
  trace.readout_pos = n - 1;
}

ForwardTrace start_trace(const Weights& weights, int64_t seq_len,
                         int start_layer) {
  weights.config.validate();
  require(seq_len >= 1, "input must contain at least one token");
  require(seq_len <= weights.config.max_seq_len,
          "input longer than max_seq_len");
  require(start_layer >= 0 && start_layer <= weights.config.n_layers,
          "start_layer out of range");
  ForwardTrace trace;
  trace.config = weights.config;
  trace.seq_len = seq_len;
  trace.start_layer = start_layer;
  return trace;
}

}  // namespace

ForwardTrace forward(const Weights& weights,
                     const std::vector<int64_t>& tokens) {
  ForwardTrace trace =
      start_trace(weights, static_cast<int64_t>(tokens.size()), 0);
  for (int64_t t : tokens) {
    require(t >= 0 && t < weights.config.vocab_size,
            "token id out of range: " + std::to_string(t));
  }
  trace.tokens = tokens;

  Tape& tape = trace.tape;
  trace.tok_table = tape.leaf(weights.get("tok_embed"));
  trace.pos_table = tape.leaf(weights.get("pos_embed"));
  std::vector<int64_t> positions(tokens.size());
  for (size_t i = 0; i < tokens.size(); ++i) {
    positions[i] = static_cast<int64_t>(i);
  }
  TensorId tok = tape.gather(trace.tok_table, tokens);
  TensorId pos = tape.gather(trace.pos_table, positions);
  trace.embedding = tape.add(tok, pos);

  run_blocks(weights, trace, trace.embedding);
  return trace;
}

ForwardTrace forward_with_embeddings(const Weights& weights,
                                     const Tensor& x_embed) {
  require(x_embed.rank() == 2 && x_embed.cols() == weights.config.d_model,
          "embedding input must be [seq, d_model]");
  ForwardTrace trace = start_trace(weights, x_embed.rows(), 0);
  trace.embedding = trace.tape.leaf(x_embed);
  run_blocks(weights, trace, trace.embedding);
  return trace;
}

ForwardTrace forward_from_layer(const Weights& weights, const Tensor& x,
                                int start_layer) {
  require(x.rank() == 2 && x.cols() == weights.config.d_model,
          "residual input must be [seq, d_model]");
  ForwardTrace trace = start_trace(weights, x.rows(), start_layer);
  TensorId x0 = trace.tape.leaf(x);
  trace.embedding = x0;
  run_blocks(weights, trace, x0);
  return trace;
}

TensorId select_target(ForwardTrace& trace, int64_t target) {
  require(target >= 0 && target < trace.config.vocab_size,
          "target token out of range: " + std::to_string(target));
  auto it = trace.z_by_target.find(target);
  if (it != trace.z_by_target.end()) return it->second;
  TensorId z = trace.tape.select(trace.logits, trace.readout_pos, target);
  trace.z_by_target.emplace(target, z);
  return z;
}

double target_logit(ForwardTrace& trace, int64_t target) {
  return trace.value(select_target(trace, target))[0];
}

const Tensor& ForwardTrace::attention_scores(int layer, int head) const {
  return value(layers[static_cast<size_t>(layer - start_layer)]
                   .heads[static_cast<size_t>(head)]
                   .scores);
}

const Tensor& ForwardTrace::attention_weights(int layer, int head) const {
  return value(layers[static_cast<size_t>(layer - start_layer)]
                   .heads[static_cast<size_t>(head)]
                   .weights);
}

const Tensor& ForwardTrace::head_values(int layer, int head) const {
  return value(layers[static_cast<size_t>(layer - start_layer)]
                   .heads[static_cast<size_t>(head)]
                   .values);
}

const std::vector<double>& ForwardTrace::ln1_sigma(int layer) const {
  return tape.layernorm_sigma(
      layers[static_cast<size_t>(layer - start_layer)].ln1_out);
}

const std::vector<double>& ForwardTrace::ln2_sigma(int layer) const {
  const LayerTrace& lt = layers[static_cast<size_t>(layer - start_layer)];
  // ln2 output id is not stored directly; its layernorm node is the one
  // whose input is residual_mid.
  for (const TapeNode& node : tape.nodes()) {
    if (node.kind == OpKind::kLayerNormRows && node.a == lt.residual_mid) {
      return node.sigma;
    }
  }
  throw std::out_of_range("no ln2 node recorded for layer");
}

}  // namespace gim
