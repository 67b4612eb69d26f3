// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "gim/model.hpp"
#include "gim/tape.hpp"
#include "gim/tensor.hpp"

namespace gim {

/// Attention state of one (layer, head): softmax input scores, softmax
/// output weights and the gradient of z with respect to the weights.
/// Collected from a trace, or built by hand in tests.
struct HeadAttention {
  int layer = 0;
  int head = 0;
  Tensor scores;   // [n, n]
  Tensor weights;  // [n, n]
  Tensor grads;    // [n, n], dz/ds
};

struct AttentionData {
  int64_t seq_len = 0;
  double forward_temperature = 1.0;
  std::vector<HeadAttention> heads;
};

/// Gathers every head's attention state plus dz/ds under all-standard rules.
AttentionData collect_attention(ForwardTrace& trace, int64_t target);

struct DetectorConfig {
  double top_fraction = 0.01;   // keep the top 1% weights by importance
  double significance = 0.01;   // epsilon for I_eps membership
  double cov_threshold = 0.1;   // coefficient-of-variation cutoff
};

/// One detected attention self-repair instance.
struct SelfRepairCase {
  int layer = 0;
  int head = 0;
  int64_t qpos = 0;
  std::vector<int64_t> significant_positions;  // I_eps, ascending
  std::vector<double> contributions;           // dz/ds_k over I_eps
  std::vector<double> weights_over_ieps;
  double mean_contribution = 0.0;
  double cov = 0.0;
  // Full row copies so ablation arithmetic needs nothing else.
  Tensor score_row;
  Tensor grad_row;
  Tensor weight_row;
  double forward_temperature = 1.0;
};

/// Ranks attention weights by |dz/ds * s|, keeps the top fraction, then
/// emits a case for every row with >= 2 significant weights whose
/// contributions over I_eps have coefficient of variation below threshold.
std::vector<SelfRepairCase> detect(const AttentionData& data,
                                   const DetectorConfig& config = {});

// The two largest attention scores in a case's row, ascending position.
std::pair<int64_t, int64_t> ablation_targets(const SelfRepairCase& c);

/// Effect of ablating one of the two largest scores (which = 1 or 2):
/// the score is driven to -inf (adding -1e30), the softmax row recomputed,
/// and the change in the weighted gradient sum sum_k g_k s_k returned.
double individual_ablation_effect(const SelfRepairCase& c, int which);

/// Both largest scores ablated at once.
double joint_ablation_effect(const SelfRepairCase& c);

/// First-order estimates of the joint effect: the summed score gradients of
/// the two ablated positions under the standard or the temperature-adjusted
/// softmax rule (unit ablation magnitude per score).
double gradient_estimate(const SelfRepairCase& c);
double tsg_estimate(const SelfRepairCase& c, double temperature);

struct ScatterRow {
  int64_t id = 0;
  int layer = 0;
  int head = 0;
  int64_t qpos = 0;
  double d_indiv_sum = 0.0;
  double d_joint = 0.0;
  double grad_est = 0.0;
  double tsg_est = 0.0;
  double cov = 0.0;
};

/// One row per case with every ablation comparison; serializes to the
/// scatter CSV.
std::vector<ScatterRow> scatter_report(const std::vector<SelfRepairCase>& cases,
                                       double tsg_temperature);

}  // namespace gim
