// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gim/tape.hpp"
#include "gim/tensor.hpp"

namespace gim {

struct ModelConfig {
  int64_t vocab_size = 64;
  int64_t d_model = 32;
  int64_t n_heads = 4;
  int64_t d_head = 8;
  int64_t n_layers = 2;
  int64_t d_mlp = 64;
  int64_t max_seq_len = 64;
  double eps_ln = 1e-5;
  // Degenerate embedding->unembedding models (n_layers = 0, no final
  // normalization) are useful as exactly-linear references in tests.
  bool use_final_ln = true;

  void validate() const;

  static ModelConfig toy_default() { return {}; }

  bool operator==(const ModelConfig&) const = default;
};

/// Named weight tensors. Iteration and serialization follow the canonical
/// name order from weight_names(), never map order of insertion.
struct Weights {
  ModelConfig config;
  std::map<std::string, Tensor> tensors;

  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
};

// Canonical tensor names (and shapes) for a config, in file order.
std::vector<std::string> weight_names(const ModelConfig& config);
std::vector<int64_t> weight_shape(const ModelConfig& config,
                                  const std::string& name);

// Deterministic scaled-normal initialization, scale 1/sqrt(d_model).
Weights init_random(const ModelConfig& config, uint64_t seed);

struct HeadTrace {
  TensorId scores = -1;   // post-scale, post-mask softmax input
  TensorId weights = -1;  // softmax output
  TensorId values = -1;
  TensorId output = -1;  // weights * values
};

struct LayerTrace {
  TensorId residual_in = -1;
  TensorId ln1_out = -1;
  std::vector<HeadTrace> heads;
  TensorId attn_out = -1;
  TensorId residual_mid = -1;
  TensorId mlp_gate = -1;
  TensorId mlp_gate_act = -1;
  TensorId mlp_up = -1;
  TensorId mlp_hidden = -1;
  TensorId mlp_out = -1;
  TensorId residual_out = -1;
};

/// Everything one forward pass recorded: the tape plus ids of the
/// activations the attribution and self-repair passes need.
struct ForwardTrace {
  Tape tape;
  ModelConfig config;
  std::vector<int64_t> tokens;  // empty when run from embeddings/residuals
  int64_t seq_len = 0;
  int64_t readout_pos = 0;
  int start_layer = 0;

  TensorId tok_table = -1;  // leaves; -1 outside the token path
  TensorId pos_table = -1;
  TensorId embedding = -1;  // post token+position embedding input
  std::vector<LayerTrace> layers;
  TensorId final_residual = -1;
  TensorId logits = -1;

  std::map<int64_t, TensorId> z_by_target;

  const Tensor& value(TensorId id) const { return tape.value(id); }
  const Tensor& attention_scores(int layer, int head) const;
  const Tensor& attention_weights(int layer, int head) const;
  const Tensor& head_values(int layer, int head) const;

  // Per-row sigma of the two block layernorms / the final layernorm.
  const std::vector<double>& ln1_sigma(int layer) const;
  const std::vector<double>& ln2_sigma(int layer) const;
};

/// Full forward pass from token ids; records the gather path so table
/// gradients are available.
ForwardTrace forward(const Weights& weights,
                     const std::vector<int64_t>& tokens);

/// Forward pass from an explicit post-embedding input (integrated-gradients
/// interpolation, finite differences).
ForwardTrace forward_with_embeddings(const Weights& weights,
                                     const Tensor& x_embed);

/// Forward pass of blocks [start_layer, n_layers) from a residual-stream
/// state, for layer-level counterfactual evaluation.
ForwardTrace forward_from_layer(const Weights& weights, const Tensor& x,
                                int start_layer);

/// Appends (or reuses) the scalar z = logits[readout_pos, target] node.
TensorId select_target(ForwardTrace& trace, int64_t target);

/// z value itself. Throws std::invalid_argument for target out of range.
double target_logit(ForwardTrace& trace, int64_t target);

}  // namespace gim
