#pragma once

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "varnn/corpus.hpp"
#include "varnn/eval.hpp"
#include "varnn/network.hpp"

namespace varnn {

/// Loss went non-finite; the message names the epoch and sequence.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t epochs = 50;
  double weight_decay = 1e-5;  // KL-surrogate coefficient
  double clip_norm = 5.0;      // <= 0 disables clipping
  std::uint64_t seed = 1;
  std::size_t patience = 5;

  void validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate <= 0");
    if (weight_decay < 0.0) throw std::invalid_argument("TrainConfig: weight_decay < 0");
    if (patience < 1) throw std::invalid_argument("TrainConfig: patience < 1");
  }
};

/// Same tensor shapes as ModelParams, accumulated by bptt.
using Gradients = ModelParams;

inline Gradients zero_like(const ModelParams& p) {
  Gradients g = p;
  for (auto& ref : tensor_refs(g)) {
    if (ref.mat)
      ref.mat->data().assign(ref.mat->size(), 0.0);
    else
      ref.vec->assign(ref.vec->size(), 0.0);
  }
  return g;
}

/// Negative log-likelihood summed over timesteps.
inline double sequence_loss(const std::vector<Vector>& logits, const std::vector<int>& labels) {
  if (logits.size() != labels.size())
    throw shape_error("sequence_loss: " + std::to_string(logits.size()) + " logit steps vs " +
                      std::to_string(labels.size()) + " labels");
  double loss = 0.0;
  for (std::size_t t = 0; t < logits.size(); ++t)
    loss += softmax_xent(logits[t], static_cast<std::size_t>(labels[t])).loss;
  return loss;
}

inline double total_objective(const ModelParams& params, double loss_nll, double weight_decay) {
  if (weight_decay < 0.0) throw std::invalid_argument("total_objective: weight_decay < 0");
  return loss_nll + weight_decay * l2_norm_sq(params);
}

namespace detail {

inline Vector slice(const Vector& v, std::size_t begin, std::size_t len) {
  return Vector(v.begin() + static_cast<std::ptrdiff_t>(begin),
                v.begin() + static_cast<std::ptrdiff_t>(begin + len));
}

}  // namespace detail

/// Exact gradient of sequence_loss over one forward tape. Masks recorded in
/// the tape are constants; the embedding gradient lands only in the rows of
/// tokens actually present.
inline Gradients bptt(const ModelParams& params, const ModelConfig& config,
                      const SequenceTape& tape, const std::vector<int>& labels) {
  const std::size_t n = tape.tokens.size();
  const std::size_t h = config.hidden_dim;
  const bool bi = tape.direction == Direction::bi;
  if (n == 0 || tape.fwd_steps.size() != n || tape.logits.size() != n ||
      tape.decoder_inputs.size() != n || (bi && tape.bwd_steps.size() != n) ||
      (tape.regime == DropoutRegime::naive &&
       (tape.input_masks.size() != n || tape.decoder_masks.size() != n)))
    throw std::invalid_argument("bptt: incomplete tape");
  if (labels.size() != n)
    throw shape_error("bptt: " + std::to_string(n) + " steps vs " +
                      std::to_string(labels.size()) + " labels");

  const bool naive = tape.regime == DropoutRegime::naive;
  const bool variational = tape.regime == DropoutRegime::variational;
  const bool lstm = tape.cell_kind == CellKind::lstm;

  Gradients g = zero_like(params);

  // Decoding layer, then the decoder-input gradient chained through whichever
  // mask the forward pass applied.
  std::vector<Vector> gu(n);
  for (std::size_t t = 0; t < n; ++t) {
    SoftmaxXent sx = softmax_xent(tape.logits[t], static_cast<std::size_t>(labels[t]));
    Vector dlogits = std::move(sx.probs);
    dlogits[static_cast<std::size_t>(labels[t])] -= 1.0;
    add_outer(g.decoder, dlogits, tape.decoder_inputs[t]);
    add_into(g.decoder_bias, dlogits);
    Vector gd = matvec_transposed(params.decoder, dlogits);
    if (variational)
      gd = apply_mask(gd, tape.var_masks->z_d);
    else if (naive)
      gd = apply_mask(gd, tape.decoder_masks[t]);
    gu[t] = std::move(gd);
  }

  // Reverse sweep over the forward-direction chain.
  std::vector<Vector> d_x(n);
  Vector gh(h, 0.0), gc(h, 0.0);
  for (std::size_t t = n; t-- > 0;) {
    Vector gh_total = bi ? detail::slice(gu[t], 0, h) : std::move(gu[t]);
    add_into(gh_total, gh);
    StepInputGrads sg =
        backward_step(params.fwd_cell, tape.fwd_steps[t], gh_total, lstm ? &gc : nullptr,
                      g.fwd_cell);
    gh = std::move(sg.d_h_prev);
    if (lstm) gc = std::move(sg.d_c_prev);
    d_x[t] = std::move(sg.d_x);
  }

  // The right-to-left chain consumed h_{t+1} at step t, so its reverse sweep
  // walks t upward.
  if (bi) {
    gh.assign(h, 0.0);
    gc.assign(h, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      Vector gh_total = detail::slice(gu[t], h, h);
      add_into(gh_total, gh);
      StepInputGrads sg = backward_step(*params.bwd_cell, tape.bwd_steps[t], gh_total,
                                        lstm ? &gc : nullptr, *g.bwd_cell);
      gh = std::move(sg.d_h_prev);
      if (lstm) gc = std::move(sg.d_c_prev);
      add_into(d_x[t], sg.d_x);
    }
  }

  for (std::size_t t = 0; t < n; ++t) {
    Vector d_emb = std::move(d_x[t]);
    if (naive) d_emb = apply_mask(d_emb, tape.input_masks[t]);
    double* row = g.embedding.row_ptr(static_cast<std::size_t>(tape.tokens[t]));
    for (std::size_t i = 0; i < d_emb.size(); ++i) row[i] += d_emb[i];
  }
  return g;
}

/// Global-norm clipping: if ||g|| > threshold every entry is scaled by
/// threshold/||g||, otherwise nothing changes. Returns the pre-clip norm.
inline double clip_gradients(Gradients& grads, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("clip_gradients: threshold <= 0");
  double norm_sq = 0.0;
  auto refs = tensor_refs(grads);
  for (const auto& ref : refs) norm_sq += ref.mat ? sum_sq(*ref.mat) : sum_sq(*ref.vec);
  const double norm = std::sqrt(norm_sq);
  if (norm > threshold) {
    const double scale = threshold / norm;
    for (auto& ref : refs) {
      if (ref.mat)
        for (double& x : ref.mat->data()) x *= scale;
      else
        for (double& x : *ref.vec) x *= scale;
    }
  }
  return norm;
}

/// w <- w - lr * (grad + 2*decay*w) for weights; biases skip the decay term.
inline void sgd_step(ModelParams& params, const Gradients& grads, double learning_rate,
                     double weight_decay) {
  auto prefs = tensor_refs(params);
  auto grefs = tensor_refs(grads);
  if (prefs.size() != grefs.size()) throw shape_error("sgd_step: tensor count mismatch");
  for (std::size_t i = 0; i < prefs.size(); ++i) {
    if (prefs[i].name != grefs[i].name || prefs[i].size() != grefs[i].size())
      throw shape_error("sgd_step: tensor " + prefs[i].name + " incongruent with gradients");
    if (prefs[i].mat) {
      auto& w = prefs[i].mat->data();
      const auto& gw = grefs[i].mat->data();
      for (std::size_t k = 0; k < w.size(); ++k)
        w[k] -= learning_rate * (gw[k] + 2.0 * weight_decay * w[k]);
    } else {
      auto& b = *prefs[i].vec;
      const auto& gb = *grefs[i].vec;
      for (std::size_t k = 0; k < b.size(); ++k) b[k] -= learning_rate * gb[k];
    }
  }
}

struct EpochStats {
  std::size_t epoch = 0;   // 1-based
  double train_loss = 0.0; // mean per-sequence NLL
  EvalReport val;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;

  /// One line per epoch: `epoch  train_loss  val_precision  val_recall  val_f`.
  std::string to_tsv() const {
    std::string out;
    char buf[160];
    for (const auto& e : epochs) {
      std::snprintf(buf, sizeof(buf), "%zu\t%.6f\t%.4f\t%.4f\t%.4f\n", e.epoch, e.train_loss,
                    e.val.precision, e.val.recall, e.val.f_measure);
      out += buf;
    }
    return out;
  }
};

struct TrainResult {
  ModelParams best_params;
  double best_val_f = 0.0;
  std::size_t best_epoch = 0;
  TrainHistory history;
};

inline EvalReport evaluate_sequences(const ModelParams& params, const ModelConfig& config,
                                     const std::vector<Sequence>& data,
                                     const std::vector<std::string>& label_names) {
  std::vector<std::vector<std::string>> gold, predicted;
  gold.reserve(data.size());
  predicted.reserve(data.size());
  for (const auto& seq : data) {
    gold.push_back(to_label_strings(seq.labels, label_names));
    predicted.push_back(
        to_label_strings(predict_labels(params, config, seq.tokens, label_names.size()),
                         label_names));
  }
  return score(gold, predicted);
}

/// Sequence-at-a-time SGD with per-epoch seeded shuffling, validation
/// chunk-F model selection and patience-based early stopping. The rng drives,
/// in order: parameter init, then per epoch the shuffle and the per-sequence
/// mask draws.
inline TrainResult train(const ModelConfig& mc, const std::vector<Sequence>& train_set,
                         const std::vector<Sequence>& val_set,
                         const std::vector<std::string>& label_names, const TrainConfig& tc,
                         Rng& rng) {
  mc.validate();
  tc.validate();
  if (train_set.empty() || val_set.empty())
    throw std::invalid_argument("train: empty dataset");

  ModelParams params = init_params(mc, rng);

  TrainResult result;
  result.best_val_f = -1.0;
  std::size_t epochs_since_improvement = 0;

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    shuffle(order, rng);
    double loss_sum = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const Sequence& seq = train_set[order[k]];
      DropoutMaskSet masks;  // must outlive the tape referencing it
      const DropoutMaskSet* masks_ptr = nullptr;
      if (mc.regime == DropoutRegime::variational) {
        masks = sample_mask_set(mc, rng);
        masks_ptr = &masks;
      }
      Rng* step_rng = mc.regime == DropoutRegime::naive ? &rng : nullptr;
      SequenceTape tape =
          forward_sequence(params, mc, seq.tokens, masks_ptr, step_rng, RunMode::train);
      const double loss = sequence_loss(tape.logits, seq.labels);
      if (!std::isfinite(loss))
        throw numeric_error("non-finite loss at epoch " + std::to_string(epoch) +
                            ", sequence " + std::to_string(order[k]));
      loss_sum += loss;
      Gradients grads = bptt(params, mc, tape, seq.labels);
      if (tc.clip_norm > 0.0) clip_gradients(grads, tc.clip_norm);
      sgd_step(params, grads, tc.learning_rate, tc.weight_decay);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(train_set.size());
    stats.val = evaluate_sequences(params, mc, val_set, label_names);
    result.history.epochs.push_back(stats);

    if (stats.val.f_measure > result.best_val_f) {
      result.best_val_f = stats.val.f_measure;
      result.best_epoch = epoch;
      result.best_params = params;
      epochs_since_improvement = 0;
    } else if (++epochs_since_improvement >= tc.patience) {
      break;
    }
  }
  return result;
}

}  // namespace varnn
