// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>

namespace gim {

enum class SoftmaxRule { kStandard, kTemperatureAdjusted };
enum class LayerNormRule { kStandard, kFreeze };
enum class MultiplyRule { kStandard, kGradNorm };

/// Backward-pass configuration. Every backward rule in the tape is selected
/// from one of these at backward time; the forward pass never looks at it.
///
/// TemperatureAdjusted recomputes the softmax weights at temperature
/// tau_fwd * T before applying the gradient formula. T = 1 reproduces the
/// standard rule bitwise. Freeze treats the layernorm sigma as a constant.
/// GradNorm halves gradients at the three multiplicative interaction sites
/// (query-key, attention-value, MLP gate-projection).
struct GradientRuleSet {
  SoftmaxRule softmax = SoftmaxRule::kStandard;
  double tsg_temperature = 1.0;
  LayerNormRule layernorm = LayerNormRule::kStandard;
  MultiplyRule multiply = MultiplyRule::kStandard;

  void validate() const {
    if (softmax == SoftmaxRule::kTemperatureAdjusted && tsg_temperature < 1.0) {
      throw std::invalid_argument("TSG temperature must be >= 1");
    }
  }

  static GradientRuleSet standard() { return {}; }

  static GradientRuleSet gim(double temperature = 2.0) {
    GradientRuleSet r;
    r.softmax = SoftmaxRule::kTemperatureAdjusted;
    r.tsg_temperature = temperature;
    r.layernorm = LayerNormRule::kFreeze;
    r.multiply = MultiplyRule::kGradNorm;
    r.validate();
    return r;
  }

  bool operator==(const GradientRuleSet&) const = default;
};

}  // namespace gim
