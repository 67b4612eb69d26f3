// SPDX-License-Identifier: Apache-2.0
#include "gim/self_repair.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gim/ops.hpp"

namespace gim {

namespace {

constexpr double kAblationValue = -1e30;

Tensor row_copy(const Tensor& m, int64_t r) {
  return Tensor({m.cols()},
                std::vector<double>(m.row(r).begin(), m.row(r).end()));
}

double weighted_sum(const Tensor& grads, const Tensor& weights) {
  double acc = 0.0;
  for (int64_t i = 0; i < grads.size(); ++i) acc += grads[i] * weights[i];
  return acc;
}

double ablated_row_sum(const SelfRepairCase& c,
                       const std::vector<int64_t>& positions) {
  Tensor scores = c.score_row;
  for (int64_t p : positions) scores[p] += kAblationValue;
  Tensor redistributed = softmax_forward(scores, c.forward_temperature);
  return weighted_sum(c.grad_row, redistributed);
}

double estimate(const SelfRepairCase& c, const GradientRuleSet& rules) {
  Tensor score_grads =
      softmax_backward(c.score_row, c.grad_row, rules, c.forward_temperature);
  auto [p1, p2] = ablation_targets(c);
  return score_grads[p1] + score_grads[p2];
}

}  // namespace

AttentionData collect_attention(ForwardTrace& trace, int64_t target) {
  TensorId z = select_target(trace, target);
  Gradients grads = backward(trace.tape, z, GradientRuleSet::standard());

  AttentionData data;
  data.seq_len = trace.seq_len;
  data.forward_temperature = 1.0;
  for (size_t l = 0; l < trace.layers.size(); ++l) {
    const LayerTrace& layer = trace.layers[l];
    for (size_t h = 0; h < layer.heads.size(); ++h) {
      const HeadTrace& head = layer.heads[h];
      HeadAttention ha;
      ha.layer = trace.start_layer + static_cast<int>(l);
      ha.head = static_cast<int>(h);
      ha.scores = trace.value(head.scores);
      ha.weights = trace.value(head.weights);
      ha.grads = grads.has(head.weights)
                     ? grads.at(head.weights)
                     : Tensor(ha.weights.shape());
      data.heads.push_back(std::move(ha));
    }
  }
  return data;
}

std::vector<SelfRepairCase> detect(const AttentionData& data,
                                   const DetectorConfig& config) {
  struct EntryRef {
    double importance;
    size_t head_index;
    int64_t q, k;
  };
  std::vector<EntryRef> entries;
  for (size_t hi = 0; hi < data.heads.size(); ++hi) {
    const HeadAttention& ha = data.heads[hi];
    for (int64_t q = 0; q < ha.weights.rows(); ++q) {
      // Causal rows: positions beyond q carry zero weight and never matter.
      for (int64_t k = 0; k <= q; ++k) {
        double imp = std::abs(ha.grads.at(q, k) * ha.weights.at(q, k));
        entries.push_back({imp, hi, q, k});
      }
    }
  }
  if (entries.empty()) return {};

  size_t keep = static_cast<size_t>(std::ceil(
      config.top_fraction * static_cast<double>(entries.size())));
  keep = std::max<size_t>(keep, 1);
  keep = std::min(keep, entries.size());
  std::sort(entries.begin(), entries.end(), [](const EntryRef& a,
                                               const EntryRef& b) {
    if (a.importance != b.importance) return a.importance > b.importance;
    if (a.head_index != b.head_index) return a.head_index < b.head_index;
    if (a.q != b.q) return a.q < b.q;
    return a.k < b.k;
  });
  entries.resize(keep);

  // Candidate rows, deduplicated, in (layer, head, qpos) order.
  std::vector<std::pair<size_t, int64_t>> rows;
  for (const EntryRef& e : entries) rows.emplace_back(e.head_index, e.q);
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());

  std::vector<SelfRepairCase> cases;
  for (auto [hi, q] : rows) {
    const HeadAttention& ha = data.heads[hi];
    std::vector<int64_t> ieps;
    for (int64_t k = 0; k <= q; ++k) {
      if (ha.weights.at(q, k) > config.significance) ieps.push_back(k);
    }
    if (ieps.size() < 2) continue;

    std::vector<double> contributions;
    contributions.reserve(ieps.size());
    double mean = 0.0;
    for (int64_t k : ieps) {
      contributions.push_back(ha.grads.at(q, k));
      mean += contributions.back();
    }
    mean /= static_cast<double>(ieps.size());
    if (std::abs(mean) < 1e-12) continue;  // no meaningful contribution
    double var = 0.0;
    for (double g : contributions) {
      double d = g - mean;
      var += d * d;
    }
    var /= static_cast<double>(ieps.size());
    double cov = std::sqrt(var) / std::abs(mean);
    if (cov >= config.cov_threshold) continue;

    SelfRepairCase c;
    c.layer = ha.layer;
    c.head = ha.head;
    c.qpos = q;
    c.significant_positions = ieps;
    c.contributions = std::move(contributions);
    for (int64_t k : ieps) c.weights_over_ieps.push_back(ha.weights.at(q, k));
    c.mean_contribution = mean;
    c.cov = cov;
    c.score_row = row_copy(ha.scores, q);
    c.grad_row = row_copy(ha.grads, q);
    c.weight_row = row_copy(ha.weights, q);
    c.forward_temperature = data.forward_temperature;
    cases.push_back(std::move(c));
  }
  return cases;
}

std::pair<int64_t, int64_t> ablation_targets(const SelfRepairCase& c) {
  int64_t best = 0, second = -1;
  const Tensor& s = c.score_row;
  for (int64_t i = 1; i < s.size(); ++i) {
    if (s[i] > s[best]) {
      second = best;
      best = i;
    } else if (second < 0 || s[i] > s[second]) {
      second = i;
    }
  }
  if (second < 0) {
    throw std::invalid_argument("ablation needs a row with >= 2 positions");
  }
  if (best > second) std::swap(best, second);
  return {best, second};
}

double individual_ablation_effect(const SelfRepairCase& c, int which) {
  if (which != 1 && which != 2) {
    throw std::invalid_argument("which must be 1 or 2");
  }
  auto [p1, p2] = ablation_targets(c);
  double original = weighted_sum(c.grad_row, c.weight_row);
  return original - ablated_row_sum(c, {which == 1 ? p1 : p2});
}

double joint_ablation_effect(const SelfRepairCase& c) {
  auto [p1, p2] = ablation_targets(c);
  double original = weighted_sum(c.grad_row, c.weight_row);
  return original - ablated_row_sum(c, {p1, p2});
}

double gradient_estimate(const SelfRepairCase& c) {
  return estimate(c, GradientRuleSet::standard());
}

double tsg_estimate(const SelfRepairCase& c, double temperature) {
  GradientRuleSet rules;
  rules.softmax = SoftmaxRule::kTemperatureAdjusted;
  rules.tsg_temperature = temperature;
  rules.validate();
  return estimate(c, rules);
}

std::vector<ScatterRow> scatter_report(const std::vector<SelfRepairCase>& cases,
                                       double tsg_temperature) {
  std::vector<ScatterRow> rows;
  rows.reserve(cases.size());
  for (size_t i = 0; i < cases.size(); ++i) {
    const SelfRepairCase& c = cases[i];
    ScatterRow r;
    r.id = static_cast<int64_t>(i);
    r.layer = c.layer;
    r.head = c.head;
    r.qpos = c.qpos;
    r.d_indiv_sum =
        individual_ablation_effect(c, 1) + individual_ablation_effect(c, 2);
    r.d_joint = joint_ablation_effect(c);
    r.grad_est = gradient_estimate(c);
    r.tsg_est = tsg_estimate(c, tsg_temperature);
    r.cov = c.cov;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace gim
