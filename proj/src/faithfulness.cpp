// SPDX-License-Identifier: Apache-2.0
#include "gim/faithfulness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gim/attribution.hpp"

namespace gim {

namespace {

// Feature order by score, descending when desc, ties by ascending position.
std::vector<int64_t> ranking(const std::vector<double>& scores, bool desc) {
  std::vector<int64_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    double sa = scores[static_cast<size_t>(a)];
    double sb = scores[static_cast<size_t>(b)];
    if (sa != sb) return desc ? sa > sb : sa < sb;
    return a < b;
  });
  return order;
}

std::vector<double> cumulative_deltas(
    double f_x, const std::vector<int64_t>& order,
    const std::function<double(const std::vector<int64_t>&)>& f_ablate) {
  std::vector<double> deltas;
  deltas.reserve(order.size());
  std::vector<int64_t> ablated;
  for (int64_t idx : order) {
    ablated.push_back(idx);
    deltas.push_back(f_x - f_ablate(ablated));
  }
  return deltas;
}

double mean_over_f(const std::vector<double>& deltas, double f_x) {
  double acc = 0.0;
  for (double d : deltas) acc += d;
  return acc / (static_cast<double>(deltas.size()) * f_x);
}

}  // namespace

FaithfulnessReport comp_suff(
    double f_x, const std::vector<double>& scores,
    const std::function<double(const std::vector<int64_t>&)>& f_ablate) {
  if (scores.empty()) {
    throw std::invalid_argument("comp_suff needs at least one feature");
  }
  if (std::abs(f_x) < kDegenerateLogit) {
    throw DegenerateInputError("target logit too close to zero (" +
                               std::to_string(f_x) + ")");
  }
  FaithfulnessReport report;
  report.n_features = static_cast<int64_t>(scores.size());
  report.f_x = f_x;
  report.comp_deltas = cumulative_deltas(f_x, ranking(scores, true), f_ablate);
  report.suff_deltas = cumulative_deltas(f_x, ranking(scores, false), f_ablate);
  report.comprehensiveness = mean_over_f(report.comp_deltas, f_x);
  report.sufficiency = mean_over_f(report.suff_deltas, f_x);
  return report;
}

FaithfulnessReport faithfulness_tokens(const Weights& weights,
                                       const std::vector<int64_t>& tokens,
                                       int64_t target,
                                       const std::vector<double>& scores,
                                       int64_t baseline_token) {
  if (scores.size() != tokens.size()) {
    throw std::invalid_argument("scores and tokens length mismatch");
  }
  if (baseline_token < 0 || baseline_token >= weights.config.vocab_size) {
    throw std::invalid_argument("baseline token out of range");
  }
  ForwardTrace trace = forward(weights, tokens);
  double f_x = target_logit(trace, target);

  auto f_ablate = [&](const std::vector<int64_t>& ablated) {
    std::vector<int64_t> perturbed = tokens;
    for (int64_t p : ablated) perturbed[static_cast<size_t>(p)] = baseline_token;
    ForwardTrace t = forward(weights, perturbed);
    return target_logit(t, target);
  };
  FaithfulnessReport report = comp_suff(f_x, scores, f_ablate);
  report.mode = PerturbMode::kTokenBaseline;
  return report;
}

double comprehensiveness(const Weights& weights,
                         const std::vector<int64_t>& tokens, int64_t target,
                         const std::vector<double>& scores,
                         int64_t baseline_token) {
  return faithfulness_tokens(weights, tokens, target, scores, baseline_token)
      .comprehensiveness;
}

double sufficiency(const Weights& weights, const std::vector<int64_t>& tokens,
                   int64_t target, const std::vector<double>& scores,
                   int64_t baseline_token) {
  return faithfulness_tokens(weights, tokens, target, scores, baseline_token)
      .sufficiency;
}

std::vector<FaithfulnessReport> layer_faithfulness(
    const Weights& weights, const std::vector<int64_t>& tokens, int64_t target,
    const std::vector<std::vector<double>>& layer_scores) {
  if (static_cast<int64_t>(layer_scores.size()) != weights.config.n_layers) {
    throw std::invalid_argument("layer_scores must have n_layers rows");
  }
  ForwardTrace trace = forward(weights, tokens);
  double f_x = target_logit(trace, target);

  std::vector<FaithfulnessReport> reports;
  for (int64_t l = 0; l < weights.config.n_layers; ++l) {
    const Tensor& x_l =
        trace.value(trace.layers[static_cast<size_t>(l)].residual_in);
    int64_t seq = x_l.rows();
    Tensor mean({x_l.cols()});
    for (int64_t p = 0; p < seq; ++p) {
      auto r = x_l.row(p);
      for (int64_t j = 0; j < x_l.cols(); ++j) mean[j] += r[j];
    }
    for (int64_t j = 0; j < x_l.cols(); ++j) {
      mean[j] /= static_cast<double>(seq);
    }

    auto f_ablate = [&](const std::vector<int64_t>& ablated) {
      Tensor patched = x_l;
      for (int64_t p : ablated) {
        auto row = patched.row(p);
        for (int64_t j = 0; j < patched.cols(); ++j) row[j] = mean[j];
      }
      ForwardTrace t =
          forward_from_layer(weights, patched, static_cast<int>(l));
      return target_logit(t, target);
    };
    FaithfulnessReport report =
        comp_suff(f_x, layer_scores[static_cast<size_t>(l)], f_ablate);
    report.mode = PerturbMode::kLayerMean;
    report.method = "layer_" + std::to_string(l);
    reports.push_back(std::move(report));
  }
  return reports;
}

std::vector<std::array<bool, 3>> all_rule_combinations() {
  std::vector<std::array<bool, 3>> combos;
  for (int tsg = 0; tsg < 2; ++tsg) {
    for (int freeze = 0; freeze < 2; ++freeze) {
      for (int gn = 0; gn < 2; ++gn) {
        combos.push_back({tsg != 0, freeze != 0, gn != 0});
      }
    }
  }
  return combos;
}

GradientRuleSet rules_for_combination(bool tsg, bool ln_freeze, bool grad_norm,
                                      double temperature) {
  GradientRuleSet rules;
  if (tsg) {
    rules.softmax = SoftmaxRule::kTemperatureAdjusted;
    rules.tsg_temperature = temperature;
  }
  if (ln_freeze) rules.layernorm = LayerNormRule::kFreeze;
  if (grad_norm) rules.multiply = MultiplyRule::kGradNorm;
  rules.validate();
  return rules;
}

std::string combination_name(bool tsg, bool ln_freeze, bool grad_norm) {
  if (!tsg && !ln_freeze && !grad_norm) return "gxi";
  std::string name = "gxi";
  if (ln_freeze) name += "+lnfreeze";
  if (grad_norm) name += "+gradnorm";
  if (tsg) name += "+tsg";
  return name;
}

std::vector<AblationStudyRow> ablation_study(
    const Weights& weights, const std::vector<AblationItemInput>& items,
    const std::vector<std::array<bool, 3>>& combinations, double temperature,
    int64_t baseline_token) {
  // Degenerate items are skipped once, consistently for every combination,
  // so all rows average over the same item set.
  std::vector<const AblationItemInput*> usable;
  int64_t skipped = 0;
  for (const AblationItemInput& item : items) {
    ForwardTrace trace = forward(weights, item.tokens);
    double f_x = target_logit(trace, item.target);
    if (std::abs(f_x) < kDegenerateLogit) {
      ++skipped;
      continue;
    }
    usable.push_back(&item);
  }

  std::vector<AblationStudyRow> rows;
  double gxi_comp = 0.0, gxi_suff = 0.0;
  bool have_gxi = false;
  for (const auto& combo : combinations) {
    AblationStudyRow row;
    row.tsg = combo[0];
    row.ln_freeze = combo[1];
    row.grad_norm = combo[2];
    row.combination = combination_name(combo[0], combo[1], combo[2]);
    GradientRuleSet rules =
        rules_for_combination(combo[0], combo[1], combo[2], temperature);

    double comp_acc = 0.0, suff_acc = 0.0;
    for (const AblationItemInput* item : usable) {
      AttributionResult attr =
          attribute_tokens(weights, item->tokens, item->target, rules,
                           baseline_token, row.combination);
      FaithfulnessReport report = faithfulness_tokens(
          weights, item->tokens, item->target, attr.scores, baseline_token);
      comp_acc += report.comprehensiveness;
      suff_acc += report.sufficiency;
    }
    row.n_items = static_cast<int64_t>(usable.size());
    row.n_skipped = skipped;
    if (!usable.empty()) {
      row.mean_comp = comp_acc / static_cast<double>(usable.size());
      row.mean_suff = suff_acc / static_cast<double>(usable.size());
    }
    if (!combo[0] && !combo[1] && !combo[2]) {
      gxi_comp = row.mean_comp;
      gxi_suff = row.mean_suff;
      have_gxi = true;
    }
    rows.push_back(std::move(row));
  }
  if (have_gxi) {
    for (AblationStudyRow& row : rows) {
      row.comp_delta_vs_gxi = row.mean_comp - gxi_comp;
      row.suff_delta_vs_gxi = row.mean_suff - gxi_suff;
    }
  }
  return rows;
}

}  // namespace gim
