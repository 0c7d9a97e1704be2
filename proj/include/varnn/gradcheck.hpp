#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "varnn/network.hpp"
#include "varnn/training.hpp"

namespace varnn {

/// Central-difference check of the analytic BPTT gradients of the full
/// objective (NLL + weight decay) on a small random instance. Masks are held
/// fixed across every evaluation: the variational regime reuses one sampled
/// mask set, the naive regime replays the same rng seed per call, so both
/// sides differentiate the identical function.
struct GradCheckSpec {
  ModelConfig config;
  std::size_t seq_len = 4;
  double weight_decay = 0.01;
  double fd_step = 1e-5;
  std::uint64_t seed = 1;
};

struct TensorCheck {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  double max_rel_err = 0.0;
  std::string worst_tensor;

  bool passed(double tolerance) const { return max_rel_err < tolerance; }
};

namespace detail {

// Safeguarded relative error: the floor keeps finite-difference noise on
// exactly-zero gradients (absent embedding rows, masked columns) from
// registering as huge relative disagreement.
inline double rel_err(double a, double b) {
  const double denom = std::max({1e-5, std::abs(a), std::abs(b)});
  return std::abs(a - b) / denom;
}

}  // namespace detail

inline GradCheckReport check_gradients(const GradCheckSpec& spec) {
  ModelConfig config = spec.config;
  config.validate();
  Rng rng(spec.seed);
  ModelParams params = init_params(config, rng);

  std::vector<int> tokens(spec.seq_len), labels(spec.seq_len);
  for (auto& t : tokens) t = static_cast<int>(rng.next_index(config.vocab_size));
  for (auto& y : labels) y = static_cast<int>(rng.next_index(config.label_count));

  DropoutMaskSet masks;
  const bool variational = config.regime == DropoutRegime::variational;
  const bool naive = config.regime == DropoutRegime::naive;
  if (variational) masks = sample_mask_set(config, rng);
  const std::uint64_t naive_seed = rng.next_u64();

  auto run_forward = [&](const ModelParams& p) {
    Rng mask_rng(naive_seed);
    return forward_sequence(p, config, tokens, variational ? &masks : nullptr,
                            naive ? &mask_rng : nullptr, RunMode::train);
  };
  auto loss_at = [&](const ModelParams& p) {
    return total_objective(p, sequence_loss(run_forward(p).logits, labels),
                           spec.weight_decay);
  };

  SequenceTape tape = run_forward(params);
  Gradients analytic = bptt(params, config, tape, labels);
  {  // d/dw of the decay term; biases carry none
    auto arefs = tensor_refs(analytic);
    auto prefs = tensor_refs(std::as_const(params));
    for (std::size_t i = 0; i < arefs.size(); ++i) {
      if (!arefs[i].mat) continue;
      auto& ga = arefs[i].mat->data();
      const auto& w = prefs[i].mat->data();
      for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += 2.0 * spec.weight_decay * w[k];
    }
  }

  GradCheckReport report;
  auto prefs = tensor_refs(params);
  auto arefs = tensor_refs(analytic);
  for (std::size_t i = 0; i < prefs.size(); ++i) {
    TensorCheck tc{prefs[i].name, 0.0};
    auto& values = prefs[i].mat ? prefs[i].mat->data() : *prefs[i].vec;
    const auto& grads = arefs[i].mat ? arefs[i].mat->data() : *arefs[i].vec;
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + spec.fd_step;
      const double plus = loss_at(params);
      values[k] = saved - spec.fd_step;
      const double minus = loss_at(params);
      values[k] = saved;
      const double numeric = (plus - minus) / (2.0 * spec.fd_step);
      tc.max_rel_err = std::max(tc.max_rel_err, detail::rel_err(grads[k], numeric));
    }
    if (tc.max_rel_err > report.max_rel_err) {
      report.max_rel_err = tc.max_rel_err;
      report.worst_tensor = tc.name;
    }
    report.tensors.push_back(std::move(tc));
  }
  return report;
}

}  // namespace varnn
