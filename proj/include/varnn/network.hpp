#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "varnn/cells.hpp"
#include "varnn/matrix.hpp"
#include "varnn/rng.hpp"

namespace varnn {

enum class Direction { uni, bi };
enum class DropoutRegime { none, naive, variational };
enum class RunMode { train, infer };

inline const char* to_string(Direction d) { return d == Direction::uni ? "uni" : "bi"; }
inline const char* to_string(DropoutRegime r) {
  switch (r) {
    case DropoutRegime::none: return "none";
    case DropoutRegime::naive: return "naive";
    case DropoutRegime::variational: return "variational";
  }
  return "?";
}

struct ModelConfig {
  CellKind cell_kind = CellKind::lstm;
  Direction direction = Direction::uni;
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 100;
  std::size_t hidden_dim = 100;
  std::size_t label_count = 128;
  DropoutRegime regime = DropoutRegime::none;
  double drop_prob = 0.5;
  bool mask_gru_candidate_hidden = false;

  std::size_t decoder_input_dim() const {
    return direction == Direction::bi ? 2 * hidden_dim : hidden_dim;
  }

  void validate() const {
    if (vocab_size == 0 || embed_dim == 0 || hidden_dim == 0)
      throw std::invalid_argument("ModelConfig: dimensions must be positive");
    if (label_count < 2) throw std::invalid_argument("ModelConfig: label_count must be >= 2");
    if (!(drop_prob >= 0.0 && drop_prob < 1.0))
      throw std::invalid_argument("ModelConfig: drop_prob must be in [0,1)");
  }
};

/// All trainable tensors of one model. `bwd_cell` is engaged only for the
/// bi-directional wiring, which gets its own untied weights.
struct ModelParams {
  Matrix embedding;  // vocab_size x embed_dim
  CellWeights fwd_cell;
  std::optional<CellWeights> bwd_cell;
  Matrix decoder;  // label_count x decoder_input_dim
  Vector decoder_bias;
};

// ---------------------------------------------------------------------------
// Tensor registry: one flat, stably ordered view over every tensor in a
// ModelParams. Initialization draw order, checkpoint layout, SGD updates and
// the finite-difference checker all iterate this same list, so they agree on
// names and order by construction. Matrices are weights (decay applies),
// vectors are biases.
// ---------------------------------------------------------------------------

template <typename MatrixT, typename VectorT>
struct BasicTensorRef {
  std::string name;
  MatrixT* mat = nullptr;
  VectorT* vec = nullptr;

  bool is_weight() const { return mat != nullptr; }
  std::size_t size() const { return mat ? mat->size() : vec->size(); }
};

using TensorRef = BasicTensorRef<Matrix, Vector>;
using ConstTensorRef = BasicTensorRef<const Matrix, const Vector>;

namespace detail {

template <typename Refs, typename CW>
void collect_cell_tensors(Refs& out, CW& cell, const std::string& prefix) {
  if (auto* v = std::get_if<VanillaWeights>(&cell)) {
    out.push_back({prefix + "w_x", &v->w_x, nullptr});
    out.push_back({prefix + "w_h", &v->w_h, nullptr});
    out.push_back({prefix + "b", nullptr, &v->b});
  } else if (auto* l = std::get_if<LstmWeights>(&cell)) {
    out.push_back({prefix + "w_xi", &l->w_xi, nullptr});
    out.push_back({prefix + "w_hi", &l->w_hi, nullptr});
    out.push_back({prefix + "w_xf", &l->w_xf, nullptr});
    out.push_back({prefix + "w_hf", &l->w_hf, nullptr});
    out.push_back({prefix + "w_xo", &l->w_xo, nullptr});
    out.push_back({prefix + "w_ho", &l->w_ho, nullptr});
    out.push_back({prefix + "w_xg", &l->w_xg, nullptr});
    out.push_back({prefix + "w_hg", &l->w_hg, nullptr});
    out.push_back({prefix + "b_i", nullptr, &l->b_i});
    out.push_back({prefix + "b_f", nullptr, &l->b_f});
    out.push_back({prefix + "b_o", nullptr, &l->b_o});
    out.push_back({prefix + "b_g", nullptr, &l->b_g});
  } else {
    auto* g = std::get_if<GruWeights>(&cell);
    out.push_back({prefix + "w_xz", &g->w_xz, nullptr});
    out.push_back({prefix + "w_hz", &g->w_hz, nullptr});
    out.push_back({prefix + "w_xr", &g->w_xr, nullptr});
    out.push_back({prefix + "w_hr", &g->w_hr, nullptr});
    out.push_back({prefix + "w_xg", &g->w_xg, nullptr});
    out.push_back({prefix + "w_hg", &g->w_hg, nullptr});
    out.push_back({prefix + "b_z", nullptr, &g->b_z});
    out.push_back({prefix + "b_r", nullptr, &g->b_r});
    out.push_back({prefix + "b_g", nullptr, &g->b_g});
  }
}

template <typename Refs, typename Params>
Refs collect_tensors(Params& p) {
  Refs out;
  out.push_back({"embedding", &p.embedding, nullptr});
  collect_cell_tensors(out, p.fwd_cell, "fwd.");
  if (p.bwd_cell) collect_cell_tensors(out, *p.bwd_cell, "bwd.");
  out.push_back({"decoder", &p.decoder, nullptr});
  out.push_back({"decoder_bias", nullptr, &p.decoder_bias});
  return out;
}

}  // namespace detail

inline std::vector<TensorRef> tensor_refs(ModelParams& p) {
  return detail::collect_tensors<std::vector<TensorRef>>(p);
}

inline std::vector<ConstTensorRef> tensor_refs(const ModelParams& p) {
  return detail::collect_tensors<std::vector<ConstTensorRef>>(p);
}

inline CellWeights make_cell_weights(CellKind kind, std::size_t embed_dim,
                                     std::size_t hidden_dim) {
  const std::size_t e = embed_dim, h = hidden_dim;
  switch (kind) {
    case CellKind::vanilla:
      return VanillaWeights{Matrix(h, e), Matrix(h, h), Vector(h, 0.0)};
    case CellKind::lstm: {
      LstmWeights w;
      w.w_xi = Matrix(h, e); w.w_hi = Matrix(h, h);
      w.w_xf = Matrix(h, e); w.w_hf = Matrix(h, h);
      w.w_xo = Matrix(h, e); w.w_ho = Matrix(h, h);
      w.w_xg = Matrix(h, e); w.w_hg = Matrix(h, h);
      w.b_i = w.b_f = w.b_o = w.b_g = Vector(h, 0.0);
      return w;
    }
    case CellKind::gru: {
      GruWeights w;
      w.w_xz = Matrix(h, e); w.w_hz = Matrix(h, h);
      w.w_xr = Matrix(h, e); w.w_hr = Matrix(h, h);
      w.w_xg = Matrix(h, e); w.w_hg = Matrix(h, h);
      w.b_z = w.b_r = w.b_g = Vector(h, 0.0);
      return w;
    }
  }
  throw std::invalid_argument("make_cell_weights: unknown cell kind");
}

inline ModelParams make_zero_params(const ModelConfig& c) {
  c.validate();
  ModelParams p;
  p.embedding = Matrix(c.vocab_size, c.embed_dim);
  p.fwd_cell = make_cell_weights(c.cell_kind, c.embed_dim, c.hidden_dim);
  if (c.direction == Direction::bi)
    p.bwd_cell = make_cell_weights(c.cell_kind, c.embed_dim, c.hidden_dim);
  p.decoder = Matrix(c.label_count, c.decoder_input_dim());
  p.decoder_bias = Vector(c.label_count, 0.0);
  return p;
}

/// Uniform [-r, r] with r = sqrt(6/(fan_in+fan_out)) per matrix, row-major
/// draw order over the tensor registry. Biases start at zero except the LSTM
/// forget bias, which starts at 1.
inline ModelParams init_params(const ModelConfig& c, Rng& rng) {
  ModelParams p = make_zero_params(c);
  for (auto& ref : tensor_refs(p)) {
    if (!ref.mat) continue;
    const double r = std::sqrt(6.0 / static_cast<double>(ref.mat->rows() + ref.mat->cols()));
    for (double& w : ref.mat->data()) w = rng.uniform(-r, r);
  }
  auto set_forget_bias = [](CellWeights& cw) {
    if (auto* l = std::get_if<LstmWeights>(&cw)) l->b_f.assign(l->b_f.size(), 1.0);
  };
  set_forget_bias(p.fwd_cell);
  if (p.bwd_cell) set_forget_bias(*p.bwd_cell);
  return p;
}

/// Sum of squared weight entries; biases excluded. Stands in for the KL term
/// of the variational objective as plain weight decay.
inline double l2_norm_sq(const ModelParams& p) {
  double s = 0.0;
  for (const auto& ref : tensor_refs(p))
    if (ref.mat) s += sum_sq(*ref.mat);
  return s;
}

/// Row `token` of the embedding matrix (one-hot times the matrix).
inline Vector embed(const ModelParams& p, std::size_t token) {
  if (token >= p.embedding.rows())
    throw std::out_of_range("embed: token " + std::to_string(token) + " out of range for vocab " +
                            std::to_string(p.embedding.rows()));
  const double* row = p.embedding.row_ptr(token);
  return Vector(row, row + p.embedding.cols());
}

/// One dropout mask set per training sequence: z_x on the embedded inputs,
/// z_h per recurrent direction, z_d on the decoder input, each shared across
/// all timesteps. Sampling order is fixed: z_x, z_h_fwd, z_h_bwd, z_d.
struct DropoutMaskSet {
  MaskVector z_x;
  MaskVector z_h_fwd;
  std::optional<MaskVector> z_h_bwd;
  MaskVector z_d;
};

inline DropoutMaskSet sample_mask_set(const ModelConfig& c, Rng& rng) {
  if (c.regime != DropoutRegime::variational)
    throw std::logic_error("sample_mask_set: regime is not variational");
  DropoutMaskSet m;
  m.z_x = sample_mask(c.embed_dim, c.drop_prob, rng);
  m.z_h_fwd = sample_mask(c.hidden_dim, c.drop_prob, rng);
  if (c.direction == Direction::bi) m.z_h_bwd = sample_mask(c.hidden_dim, c.drop_prob, rng);
  m.z_d = sample_mask(c.decoder_input_dim(), c.drop_prob, rng);
  return m;
}

/// Per-sequence forward cache. Owns the fresh per-step masks of the naive
/// regime; in the variational regime it references the caller's mask set,
/// which must outlive any backward pass over this tape.
struct SequenceTape {
  CellKind cell_kind = CellKind::vanilla;
  Direction direction = Direction::uni;
  DropoutRegime regime = DropoutRegime::none;
  RunMode mode = RunMode::infer;
  std::vector<int> tokens;
  const DropoutMaskSet* var_masks = nullptr;
  std::vector<MaskVector> input_masks;    // naive: fresh mask per step, length E
  std::vector<MaskVector> decoder_masks;  // naive: fresh mask per step, length H or 2H
  std::vector<TapeStep> fwd_steps;
  std::vector<TapeStep> bwd_steps;  // bi only
  std::vector<Vector> decoder_inputs;  // post-mask vectors fed to the decoder
  std::vector<Vector> logits;
};

/// Left-to-right and right-to-left passes over the embedded sequence, each
/// from a fresh zero state, concatenated per step as [forward; backward].
struct BidirOut {
  std::vector<TapeStep> fwd_steps;
  std::vector<TapeStep> bwd_steps;
  std::vector<Vector> concat;
};

inline BidirOut forward_bidirectional(const CellWeights& fwd, const CellWeights& bwd,
                                      std::size_t hidden_dim, const std::vector<Vector>& xs,
                                      const MaskVector* z_x, const MaskVector* z_h_fwd,
                                      const MaskVector* z_h_bwd,
                                      bool mask_gru_candidate_hidden = false) {
  if (xs.empty()) throw std::invalid_argument("forward_bidirectional: empty sequence");
  const std::size_t n = xs.size();
  const CellKind kind = cell_kind_of(fwd);
  BidirOut out;
  out.fwd_steps.resize(n);
  out.bwd_steps.resize(n);

  CellState state = initial_state(kind, hidden_dim);
  for (std::size_t t = 0; t < n; ++t) {
    StepOut s = cell_step(fwd, xs[t], state, z_x, z_h_fwd, mask_gru_candidate_hidden);
    out.fwd_steps[t] = std::move(s.tape);
    state = std::move(s.state);
  }
  state = initial_state(kind, hidden_dim);
  for (std::size_t t = n; t-- > 0;) {
    StepOut s = cell_step(bwd, xs[t], state, z_x, z_h_bwd, mask_gru_candidate_hidden);
    out.bwd_steps[t] = std::move(s.tape);
    state = std::move(s.state);
  }

  out.concat.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    Vector& u = out.concat[t];
    u.reserve(2 * hidden_dim);
    u.insert(u.end(), out.fwd_steps[t].h_t.begin(), out.fwd_steps[t].h_t.end());
    u.insert(u.end(), out.bwd_steps[t].h_t.begin(), out.bwd_steps[t].h_t.end());
  }
  return out;
}

namespace detail {

inline void check_mask_set(const ModelConfig& c, const DropoutMaskSet& m) {
  check_mask_len(m.z_x, c.embed_dim, "forward_sequence z_x");
  check_mask_len(m.z_h_fwd, c.hidden_dim, "forward_sequence z_h_fwd");
  if (c.direction == Direction::bi) {
    if (!m.z_h_bwd) throw shape_error("forward_sequence: bi direction requires z_h_bwd");
    check_mask_len(*m.z_h_bwd, c.hidden_dim, "forward_sequence z_h_bwd");
  } else if (m.z_h_bwd) {
    throw shape_error("forward_sequence: z_h_bwd present for uni direction");
  }
  check_mask_len(m.z_d, c.decoder_input_dim(), "forward_sequence z_d");
}

}  // namespace detail

/// Full per-token classifier pass. Regime semantics in train mode:
///   none:        no masks anywhere;
///   naive:       fresh masks per timestep on the embedding output and on
///                the decoder input (sampled in that order, step by step);
///                recurrent transitions stay unmasked;
///   variational: the caller's mask set applies at every step, z_x to each
///                embedded input, z_h inside the cell, z_d to each decoder
///                input.
/// Infer mode never drops anything regardless of regime.
inline SequenceTape forward_sequence(const ModelParams& params, const ModelConfig& config,
                                     const std::vector<int>& tokens,
                                     const DropoutMaskSet* masks, Rng* rng, RunMode mode) {
  if (tokens.empty()) throw std::invalid_argument("forward_sequence: empty sequence");
  const bool dropping = mode == RunMode::train && config.regime != DropoutRegime::none;
  const bool variational = dropping && config.regime == DropoutRegime::variational;
  const bool naive = dropping && config.regime == DropoutRegime::naive;
  if (variational) {
    if (!masks) throw std::invalid_argument("forward_sequence: variational train needs masks");
    detail::check_mask_set(config, *masks);
  }
  if (naive && !rng)
    throw std::invalid_argument("forward_sequence: naive train needs an rng");

  const std::size_t n = tokens.size();
  SequenceTape tape;
  tape.cell_kind = config.cell_kind;
  tape.direction = config.direction;
  tape.regime = dropping ? config.regime : DropoutRegime::none;
  tape.mode = mode;
  tape.tokens = tokens;
  tape.var_masks = variational ? masks : nullptr;

  // Embedded inputs; the naive regime masks them here, the variational
  // regime hands the shared z_x to the cell instead.
  std::vector<Vector> xs(n);
  for (std::size_t t = 0; t < n; ++t) {
    Vector x = embed(params, static_cast<std::size_t>(tokens[t]));
    if (naive) {
      tape.input_masks.push_back(sample_mask(config.embed_dim, config.drop_prob, *rng));
      x = apply_mask(x, tape.input_masks.back());
    }
    xs[t] = std::move(x);
  }

  const MaskVector* z_x = variational ? &masks->z_x : nullptr;
  const MaskVector* z_h_fwd = variational ? &masks->z_h_fwd : nullptr;
  const MaskVector* z_h_bwd = variational && masks->z_h_bwd ? &*masks->z_h_bwd : nullptr;

  std::vector<Vector> hidden(n);
  if (config.direction == Direction::bi) {
    BidirOut bo = forward_bidirectional(params.fwd_cell, *params.bwd_cell, config.hidden_dim, xs,
                                        z_x, z_h_fwd, z_h_bwd, config.mask_gru_candidate_hidden);
    tape.fwd_steps = std::move(bo.fwd_steps);
    tape.bwd_steps = std::move(bo.bwd_steps);
    hidden = std::move(bo.concat);
  } else {
    tape.fwd_steps.resize(n);
    CellState state = initial_state(config.cell_kind, config.hidden_dim);
    for (std::size_t t = 0; t < n; ++t) {
      StepOut s = cell_step(params.fwd_cell, xs[t], state, z_x, z_h_fwd,
                            config.mask_gru_candidate_hidden);
      tape.fwd_steps[t] = std::move(s.tape);
      state = std::move(s.state);
      hidden[t] = tape.fwd_steps[t].h_t;
    }
  }

  tape.decoder_inputs.resize(n);
  tape.logits.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    Vector d = std::move(hidden[t]);
    if (naive) {
      tape.decoder_masks.push_back(
          sample_mask(config.decoder_input_dim(), config.drop_prob, *rng));
      d = apply_mask(d, tape.decoder_masks.back());
    } else if (variational) {
      d = apply_mask(d, masks->z_d);
    }
    tape.logits[t] = affine(params.decoder, d, params.decoder_bias);
    tape.decoder_inputs[t] = std::move(d);
  }
  return tape;
}

/// Per-token argmax over the first `n_labels` logits (decoder rows beyond the
/// known label set are padding and never predicted).
inline std::vector<int> predict_labels(const ModelParams& params, const ModelConfig& config,
                                       const std::vector<int>& tokens, std::size_t n_labels) {
  SequenceTape tape = forward_sequence(params, config, tokens, nullptr, nullptr, RunMode::infer);
  std::vector<int> out(tokens.size());
  const std::size_t k = std::min(n_labels, config.label_count);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const Vector& l = tape.logits[t];
    std::size_t best = 0;
    for (std::size_t i = 1; i < k; ++i)
      if (l[i] > l[best]) best = i;
    out[t] = static_cast<int>(best);
  }
  return out;
}

}  // namespace varnn
