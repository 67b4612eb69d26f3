// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gim/model.hpp"
#include "gim/rules.hpp"

namespace gim {

/// Raised when |f(x)| is too small for the normalized metrics to be defined.
class DegenerateInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kDegenerateLogit = 1e-9;

enum class PerturbMode { kTokenBaseline, kLayerMean };

struct FaithfulnessReport {
  std::string method;
  int64_t n_features = 0;
  double f_x = 0.0;
  std::vector<double> comp_deltas;  // f(x) - f(perturbed), per step
  std::vector<double> suff_deltas;
  double comprehensiveness = 0.0;
  double sufficiency = 0.0;
  PerturbMode mode = PerturbMode::kTokenBaseline;
};

/// Shared cumulative-ablation core. rank orders features by score descending
/// (comprehensiveness) or ascending (sufficiency), ties broken by ascending
/// position; f_ablate evaluates the model with the given feature set
/// perturbed. Throws DegenerateInputError when |f_x| < 1e-9.
FaithfulnessReport comp_suff(
    double f_x, const std::vector<double>& scores,
    const std::function<double(const std::vector<int64_t>&)>& f_ablate);

/// Token-level metrics: perturbation replaces selected tokens with the
/// baseline token and reruns the model.
FaithfulnessReport faithfulness_tokens(const Weights& weights,
                                       const std::vector<int64_t>& tokens,
                                       int64_t target,
                                       const std::vector<double>& scores,
                                       int64_t baseline_token);

double comprehensiveness(const Weights& weights,
                         const std::vector<int64_t>& tokens, int64_t target,
                         const std::vector<double>& scores,
                         int64_t baseline_token);
double sufficiency(const Weights& weights, const std::vector<int64_t>& tokens,
                   int64_t target, const std::vector<double>& scores,
                   int64_t baseline_token);

/// Per-layer metrics: perturbation replaces the residual representation at
/// the selected positions with the layer's positional mean and reruns the
/// blocks from that layer on.
std::vector<FaithfulnessReport> layer_faithfulness(
    const Weights& weights, const std::vector<int64_t>& tokens, int64_t target,
    const std::vector<std::vector<double>>& layer_scores);

/// One row of the modification ablation study.
struct AblationStudyRow {
  std::string combination;  // e.g. "gxi", "+gradnorm+lnfreeze+tsg"
  bool tsg = false;
  bool ln_freeze = false;
  bool grad_norm = false;
  double mean_comp = 0.0;
  double mean_suff = 0.0;
  double comp_delta_vs_gxi = 0.0;
  double suff_delta_vs_gxi = 0.0;
  int64_t n_items = 0;
  int64_t n_skipped = 0;
};

struct AblationItemInput {
  std::vector<int64_t> tokens;
  int64_t target = 0;
};

/// Evaluates every requested {TSG, LN-freeze, grad-norm} subset over a
/// dataset; deltas are relative to the plain gradient-times-input row.
std::vector<AblationStudyRow> ablation_study(
    const Weights& weights, const std::vector<AblationItemInput>& items,
    const std::vector<std::array<bool, 3>>& combinations, double temperature,
    int64_t baseline_token);

/// All 8 subsets of {TSG, LN-freeze, grad-norm} in canonical order.
std::vector<std::array<bool, 3>> all_rule_combinations();

GradientRuleSet rules_for_combination(bool tsg, bool ln_freeze, bool grad_norm,
                                      double temperature);
std::string combination_name(bool tsg, bool ln_freeze, bool grad_norm);

}  // namespace gim
