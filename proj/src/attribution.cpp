// SPDX-License-Identifier: Apache-2.0
#include "gim/attribution.hpp"

#include <stdexcept>

#include "gim/kernels.hpp"

namespace gim {

namespace {

// x_baseline[i] = tok_embed[baseline] + pos_embed[i].
Tensor baseline_embedding(const Weights& weights, int64_t seq_len,
                          int64_t baseline_token) {
  const ModelConfig& c = weights.config;
  if (baseline_token < 0 || baseline_token >= c.vocab_size) {
    throw std::invalid_argument("baseline token out of range");
  }
  const Tensor& tok = weights.get("tok_embed");
  const Tensor& pos = weights.get("pos_embed");
  Tensor out({seq_len, c.d_model});
  for (int64_t i = 0; i < seq_len; ++i) {
    auto t = tok.row(baseline_token);
    auto p = pos.row(i);
    auto dst = out.row(i);
    for (int64_t j = 0; j < c.d_model; ++j) dst[j] = t[j] + p[j];
  }
  return out;
}

std::vector<double> dot_rows(const Tensor& diff, const Tensor& grad) {
  std::vector<double> scores(static_cast<size_t>(diff.rows()), 0.0);
  for (int64_t i = 0; i < diff.rows(); ++i) {
    double acc = 0.0;
    auto d = diff.row(i);
    auto g = grad.row(i);
    for (int64_t j = 0; j < diff.cols(); ++j) acc += d[j] * g[j];
    scores[static_cast<size_t>(i)] = acc;
  }
  return scores;
}

Tensor embedding_gradient(const Weights& weights, const Tensor& x_embed,
                          int64_t target, const GradientRuleSet& rules) {
  ForwardTrace trace = forward_with_embeddings(weights, x_embed);
  TensorId z = select_target(trace, target);
  Gradients grads = backward(trace.tape, z, rules);
  if (!grads.has(trace.embedding)) return Tensor(x_embed.shape());
  return grads.at(trace.embedding);
}

}  // namespace

AttributionResult attribute_tokens(const Weights& weights,
                                   const std::vector<int64_t>& tokens,
                                   int64_t target,
                                   const GradientRuleSet& rules,
                                   int64_t baseline_token,
                                   const std::string& method_name) {
  rules.validate();
  ForwardTrace trace = forward(weights, tokens);
  TensorId z = select_target(trace, target);
  Gradients grads = backward(trace.tape, z, rules);

  const Tensor& x = trace.value(trace.embedding);
  Tensor x_base =
      baseline_embedding(weights, trace.seq_len, baseline_token);
  Tensor diff(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) diff[i] = x[i] - x_base[i];

  AttributionResult result;
  result.method = method_name;
  result.rules = rules;
  result.target = target;
  result.baseline_token = baseline_token;
  result.tokens = tokens;
  result.scores = dot_rows(diff, grads.has(trace.embedding)
                                     ? grads.at(trace.embedding)
                                     : Tensor(x.shape()));
  return result;
}

AttributionResult gxi(const Weights& weights,
                      const std::vector<int64_t>& tokens, int64_t target,
                      int64_t baseline_token) {
  return attribute_tokens(weights, tokens, target,
                          GradientRuleSet::standard(), baseline_token, "gxi");
}

AttributionResult gim_attribution(const Weights& weights,
                                  const std::vector<int64_t>& tokens,
                                  int64_t target, double temperature,
                                  int64_t baseline_token) {
  if (temperature < 1.0) {
    throw std::invalid_argument("GIM temperature must be >= 1");
  }
  return attribute_tokens(weights, tokens, target,
                          GradientRuleSet::gim(temperature), baseline_token,
                          "gim");
}

AttributionResult integrated_gradients(const Weights& weights,
                                       const std::vector<int64_t>& tokens,
                                       int64_t target, int steps,
                                       int64_t baseline_token,
                                       const GradientRuleSet& rules) {
  if (steps < 1) {
    throw std::invalid_argument("integrated gradients needs steps >= 1");
  }
  rules.validate();
  ForwardTrace trace = forward(weights, tokens);
  const Tensor& x = trace.value(trace.embedding);
  Tensor x_base = baseline_embedding(weights, trace.seq_len, baseline_token);
  Tensor diff(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) diff[i] = x[i] - x_base[i];

  // Midpoint Riemann sum; step gradients are independent forward passes, so
  // they can run in parallel, with the accumulation kept in step order.
  std::vector<Tensor> step_grads(static_cast<size_t>(steps));
#pragma omp parallel for schedule(dynamic) if (kernels::parallel_enabled())
  for (int s = 0; s < steps; ++s) {
    double t = (static_cast<double>(s) + 0.5) / static_cast<double>(steps);
    Tensor x_t(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) {
      x_t[i] = x_base[i] + t * diff[i];
    }
    step_grads[static_cast<size_t>(s)] =
        embedding_gradient(weights, x_t, target, rules);
  }
  Tensor avg(x.shape());
  for (int s = 0; s < steps; ++s) {
    const Tensor& g = step_grads[static_cast<size_t>(s)];
    for (int64_t i = 0; i < avg.size(); ++i) avg[i] += g[i];
  }
  double inv = 1.0 / static_cast<double>(steps);
  for (int64_t i = 0; i < avg.size(); ++i) avg[i] *= inv;

  AttributionResult result;
  result.method = "ig";
  result.rules = rules;
  result.target = target;
  result.baseline_token = baseline_token;
  result.tokens = tokens;
  result.scores = dot_rows(diff, avg);
  return result;
}

const char* layer_method_name(LayerMethod method) {
  switch (method) {
    case LayerMethod::kAtp: return "atp";
    case LayerMethod::kAtpStar: return "atp_star";
    case LayerMethod::kIg: return "ig";
    case LayerMethod::kGim: return "gim";
  }
  return "unknown";
}

LayerAttributionResult layer_attribution(const Weights& weights,
                                         const std::vector<int64_t>& tokens,
                                         int64_t target, LayerMethod method,
                                         double temperature, int ig_steps) {
  if (method == LayerMethod::kIg && ig_steps < 1) {
    throw std::invalid_argument("integrated gradients needs steps >= 1");
  }
  int64_t n_layers = weights.config.n_layers;
  int64_t seq = static_cast<int64_t>(tokens.size());

  LayerAttributionResult result;
  result.method = layer_method_name(method);
  result.n_layers = n_layers;
  result.seq_len = seq;
  result.scores.assign(static_cast<size_t>(n_layers),
                       std::vector<double>(static_cast<size_t>(seq), 0.0));

  GradientRuleSet rules = GradientRuleSet::standard();
  if (method == LayerMethod::kAtpStar) {
    rules.softmax = SoftmaxRule::kTemperatureAdjusted;
    rules.tsg_temperature = temperature;
  } else if (method == LayerMethod::kGim) {
    rules = GradientRuleSet::gim(temperature);
  }

  // Single backward serves every gradient-at-representation method.
  ForwardTrace graded = forward(weights, tokens);
  TensorId z = select_target(graded, target);
  Gradients g_at = backward(graded.tape, z, rules);

  for (int64_t l = 0; l < n_layers; ++l) {
    const LayerTrace& lt = graded.layers[static_cast<size_t>(l)];
    const Tensor& x_l = graded.value(lt.residual_in);
    // Positional mean of the residual stream at this layer.
    Tensor mean({x_l.cols()});
    for (int64_t p = 0; p < seq; ++p) {
      auto r = x_l.row(p);
      for (int64_t j = 0; j < x_l.cols(); ++j) mean[j] += r[j];
    }
    for (int64_t j = 0; j < x_l.cols(); ++j) {
      mean[j] /= static_cast<double>(seq);
    }
    Tensor diff(x_l.shape());
    for (int64_t p = 0; p < seq; ++p) {
      auto r = x_l.row(p);
      auto d = diff.row(p);
      for (int64_t j = 0; j < x_l.cols(); ++j) d[j] = r[j] - mean[j];
    }

    Tensor alpha(x_l.shape());
    if (method == LayerMethod::kIg) {
      std::vector<Tensor> step_grads(static_cast<size_t>(ig_steps));
#pragma omp parallel for schedule(dynamic) if (kernels::parallel_enabled())
      for (int s = 0; s < ig_steps; ++s) {
        double t = (static_cast<double>(s) + 0.5) /
                   static_cast<double>(ig_steps);
        Tensor x_t(x_l.shape());
        for (int64_t i = 0; i < x_l.size(); ++i) {
          // Path from the broadcast layer mean to the actual residual.
          int64_t j = i % x_l.cols();
          x_t[i] = mean[j] + t * diff[i];
        }
        ForwardTrace ft =
            forward_from_layer(weights, x_t, static_cast<int>(l));
        TensorId zs = select_target(ft, target);
        Gradients gs = backward(ft.tape, zs, GradientRuleSet::standard());
        step_grads[static_cast<size_t>(s)] =
            gs.has(ft.embedding) ? gs.at(ft.embedding) : Tensor(x_l.shape());
      }
      for (int s = 0; s < ig_steps; ++s) {
        const Tensor& g = step_grads[static_cast<size_t>(s)];
        for (int64_t i = 0; i < alpha.size(); ++i) alpha[i] += g[i];
      }
      double inv = 1.0 / static_cast<double>(ig_steps);
      for (int64_t i = 0; i < alpha.size(); ++i) alpha[i] *= inv;
    } else {
      if (g_at.has(lt.residual_in)) alpha = g_at.at(lt.residual_in);
    }

    std::vector<double> s = dot_rows(diff, alpha);
    result.scores[static_cast<size_t>(l)] = std::move(s);
  }
  return result;
}

}  // namespace gim
