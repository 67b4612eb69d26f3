// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "gim/model.hpp"
#include "gim/rules.hpp"

namespace gim {

struct AttributionResult {
  std::string method;
  GradientRuleSet rules;
  std::vector<double> scores;  // one per input token
  int64_t target = -1;
  int64_t baseline_token = -1;
  std::vector<int64_t> tokens;
};

/// Gradient-times-input-difference attribution over input tokens:
/// score_i = (x_i - x_baseline_i) . dz/dx_i, gradients taken at the
/// post-embedding input under the given rule set. The baseline shares each
/// position's position embedding, so positional signal cancels in the
/// difference.
AttributionResult attribute_tokens(const Weights& weights,
                                   const std::vector<int64_t>& tokens,
                                   int64_t target,
                                   const GradientRuleSet& rules,
                                   int64_t baseline_token,
                                   const std::string& method_name = "custom");

/// GradientXInput: attribute_tokens with all-standard rules.
AttributionResult gxi(const Weights& weights,
                      const std::vector<int64_t>& tokens, int64_t target,
                      int64_t baseline_token);

/// Full modified rule set {temperature-adjusted softmax, layernorm freeze,
/// grad-norm}. Throws std::invalid_argument for temperature < 1.
AttributionResult gim_attribution(const Weights& weights,
                                  const std::vector<int64_t>& tokens,
                                  int64_t target, double temperature,
                                  int64_t baseline_token);

/// Midpoint-rule integrated gradients along the straight embedding path
/// from the baseline to the input.
AttributionResult integrated_gradients(
    const Weights& weights, const std::vector<int64_t>& tokens, int64_t target,
    int steps, int64_t baseline_token,
    const GradientRuleSet& rules = GradientRuleSet::standard());

enum class LayerMethod { kAtp, kAtpStar, kIg, kGim };

struct LayerAttributionResult {
  std::string method;
  int64_t n_layers = 0;
  int64_t seq_len = 0;
  // scores[layer][position], counterfactual is the layer's positional mean.
  std::vector<std::vector<double>> scores;
};

/// Residual-stream attribution per (layer, position) against the layer's
/// positional-mean counterfactual. ATP runs all-standard rules, ATP* adds
/// the temperature-adjusted softmax rule only, GIM uses the full rule set,
/// IG integrates along the path from the layer mean.
LayerAttributionResult layer_attribution(const Weights& weights,
                                         const std::vector<int64_t>& tokens,
                                         int64_t target, LayerMethod method,
                                         double temperature = 2.0,
                                         int ig_steps = 32);

const char* layer_method_name(LayerMethod method);

}  // namespace gim
