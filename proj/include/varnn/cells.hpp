#pragma once

#include <optional>
#include <string>
#include <variant>

#include "varnn/matrix.hpp"
#include "varnn/rng.hpp"

namespace varnn {

enum class CellKind { vanilla, lstm, gru };

inline const char* to_string(CellKind k) {
  switch (k) {
    case CellKind::vanilla: return "vanilla";
    case CellKind::lstm: return "lstm";
    case CellKind::gru: return "gru";
  }
  return "?";
}

/// h_t = tanh(w_x x_t + w_h h_{t-1} + b)
struct VanillaWeights {
  Matrix w_x, w_h;
  Vector b;
};

struct LstmWeights {
  Matrix w_xi, w_hi;  // input gate
  Matrix w_xf, w_hf;  // forget gate
  Matrix w_xo, w_ho;  // output gate
  Matrix w_xg, w_hg;  // candidate
  Vector b_i, b_f, b_o, b_g;
};

struct GruWeights {
  Matrix w_xz, w_hz;  // update gate
  Matrix w_xr, w_hr;  // reset gate
  Matrix w_xg, w_hg;  // candidate
  Vector b_z, b_r, b_g;
};

using CellWeights = std::variant<VanillaWeights, LstmWeights, GruWeights>;

inline CellKind cell_kind_of(const CellWeights& w) {
  return static_cast<CellKind>(w.index());
}

/// Recurrent state. `c` is non-empty only for LSTM cells.
struct CellState {
  Vector h;
  Vector c;
};

/// Everything one forward step caches for exact reverse-mode differentiation.
/// Mask pointers refer to the per-sequence mask set owned by the caller; null
/// means the identity (no dropout on that path). The same pointers appearing
/// at every timestep is precisely the mask-sharing the variational regime
/// requires, so tests assert on pointer identity.
struct TapeStep {
  CellKind kind = CellKind::vanilla;
  Vector x_used;       // input as fed to the gates (masked if z_x set)
  Vector h_prev_used;  // previous hidden as fed to the gates (masked if z_h set)
  Vector h_prev;       // raw previous hidden (GRU interpolation/candidate path)
  Vector c_prev;       // LSTM
  Vector gate_i, gate_f, gate_o;  // LSTM activations
  Vector gate_z, gate_r;          // GRU activations
  Vector candidate;               // g_t (LSTM/GRU)
  Vector cand_hidden;             // GRU: vector fed to w_hg (r ⊙ h or r ⊙ ĥ)
  Vector c_t, tanh_c;             // LSTM
  Vector h_t;
  const MaskVector* z_x = nullptr;
  const MaskVector* z_h = nullptr;
  bool candidate_hidden_masked = false;  // GRU: whether z_h reached the w_hg path
};

struct StepOut {
  CellState state;
  TapeStep tape;
};

/// Gradients a single backward step hands to its neighbours.
struct StepInputGrads {
  Vector d_x;       // w.r.t. the raw x_t the step received
  Vector d_h_prev;  // w.r.t. the raw previous hidden state
  Vector d_c_prev;  // LSTM only
};

namespace detail {

inline Vector masked_or(const Vector& v, const MaskVector* m) {
  return m ? apply_mask(v, *m) : v;
}

// d/dv of (v ⊙ mask) applied to an upstream gradient; identity when no mask.
inline Vector chain_mask(Vector g, const MaskVector* m) {
  if (m) {
    check_len(g, m->values, "chain_mask");
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= m->values[i];
  }
  return g;
}

inline void check_mask_len(const MaskVector& m, std::size_t want, const char* name) {
  if (m.size() != want)
    throw shape_error(std::string(name) + ": mask length " + std::to_string(m.size()) +
                      ", expected " + std::to_string(want));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Forward steps. The masked and plain variants share one code path; a null
// mask is the identity, so the p=0 variational regime collapses bit-exactly
// onto the plain recurrences.
// ---------------------------------------------------------------------------

inline StepOut vanilla_step_masked(const VanillaWeights& w, const Vector& x,
                                   const CellState& state, const MaskVector* z_x,
                                   const MaskVector* z_h) {
  StepOut out;
  TapeStep& t = out.tape;
  t.kind = CellKind::vanilla;
  t.z_x = z_x;
  t.z_h = z_h;
  t.x_used = detail::masked_or(x, z_x);
  t.h_prev = state.h;
  t.h_prev_used = detail::masked_or(state.h, z_h);
  Vector pre = affine(w.w_x, t.x_used, w.b);
  add_into(pre, affine(w.w_h, t.h_prev_used));
  t.h_t = vtanh(pre);
  out.state.h = t.h_t;
  return out;
}

inline StepOut vanilla_step(const VanillaWeights& w, const Vector& x, const CellState& state) {
  return vanilla_step_masked(w, x, state, nullptr, nullptr);
}

inline StepOut lstm_step_masked(const LstmWeights& w, const Vector& x, const CellState& state,
                                const MaskVector* z_x, const MaskVector* z_h) {
  if (state.c.size() != state.h.size())
    throw shape_error("lstm_step: memory vector missing or mis-sized");
  StepOut out;
  TapeStep& t = out.tape;
  t.kind = CellKind::lstm;
  t.z_x = z_x;
  t.z_h = z_h;
  t.x_used = detail::masked_or(x, z_x);
  t.h_prev = state.h;
  t.h_prev_used = detail::masked_or(state.h, z_h);
  t.c_prev = state.c;

  auto gate_pre = [&](const Matrix& wx, const Matrix& wh, const Vector& b) {
    Vector pre = affine(wx, t.x_used, b);
    add_into(pre, affine(wh, t.h_prev_used));
    return pre;
  };
  t.gate_i = sigm(gate_pre(w.w_xi, w.w_hi, w.b_i));
  t.gate_f = sigm(gate_pre(w.w_xf, w.w_hf, w.b_f));
  t.gate_o = sigm(gate_pre(w.w_xo, w.w_ho, w.b_o));
  t.candidate = vtanh(gate_pre(w.w_xg, w.w_hg, w.b_g));

  t.c_t = add(hadamard(t.gate_f, t.c_prev), hadamard(t.gate_i, t.candidate));
  t.tanh_c = vtanh(t.c_t);
  t.h_t = hadamard(t.gate_o, t.tanh_c);

  out.state.h = t.h_t;
  out.state.c = t.c_t;
  return out;
}

inline StepOut lstm_step(const LstmWeights& w, const Vector& x, const CellState& state) {
  return lstm_step_masked(w, x, state, nullptr, nullptr);
}

inline StepOut lstm_step_variational(const LstmWeights& w, const Vector& x,
                                     const CellState& state, const MaskVector& z_x,
                                     const MaskVector& z_h) {
  detail::check_mask_len(z_x, x.size(), "lstm_step_variational z_x");
  detail::check_mask_len(z_h, state.h.size(), "lstm_step_variational z_h");
  return lstm_step_masked(w, x, state, &z_x, &z_h);
}

/// GRU step. The update uses h_t = (1-z_t) ⊙ h_prev + z_t ⊙ g_t. When masks
/// are supplied, the candidate's hidden path stays unmasked (r ⊙ raw h_prev)
/// unless `mask_candidate_hidden` is set.
inline StepOut gru_step_masked(const GruWeights& w, const Vector& x, const CellState& state,
                               const MaskVector* z_x, const MaskVector* z_h,
                               bool mask_candidate_hidden = false) {
  if (!state.c.empty())
    throw shape_error("gru_step: unexpected memory vector on a GRU state");
  StepOut out;
  TapeStep& t = out.tape;
  t.kind = CellKind::gru;
  t.z_x = z_x;
  t.z_h = z_h;
  t.candidate_hidden_masked = mask_candidate_hidden && z_h != nullptr;
  t.x_used = detail::masked_or(x, z_x);
  t.h_prev = state.h;
  t.h_prev_used = detail::masked_or(state.h, z_h);

  auto gate_pre = [&](const Matrix& wx, const Matrix& wh, const Vector& b) {
    Vector pre = affine(wx, t.x_used, b);
    add_into(pre, affine(wh, t.h_prev_used));
    return pre;
  };
  t.gate_z = sigm(gate_pre(w.w_xz, w.w_hz, w.b_z));
  t.gate_r = sigm(gate_pre(w.w_xr, w.w_hr, w.b_r));

  t.cand_hidden = hadamard(t.gate_r, t.candidate_hidden_masked ? t.h_prev_used : t.h_prev);
  Vector pre_g = affine(w.w_xg, t.x_used, w.b_g);
  add_into(pre_g, affine(w.w_hg, t.cand_hidden));
  t.candidate = vtanh(pre_g);

  t.h_t.resize(state.h.size());
  for (std::size_t i = 0; i < t.h_t.size(); ++i)
    t.h_t[i] = (1.0 - t.gate_z[i]) * t.h_prev[i] + t.gate_z[i] * t.candidate[i];

  out.state.h = t.h_t;
  return out;
}

inline StepOut gru_step(const GruWeights& w, const Vector& x, const CellState& state) {
  return gru_step_masked(w, x, state, nullptr, nullptr);
}

inline StepOut gru_step_variational(const GruWeights& w, const Vector& x, const CellState& state,
                                    const MaskVector& z_x, const MaskVector& z_h,
                                    bool mask_candidate_hidden = false) {
  detail::check_mask_len(z_x, x.size(), "gru_step_variational z_x");
  detail::check_mask_len(z_h, state.h.size(), "gru_step_variational z_h");
  return gru_step_masked(w, x, state, &z_x, &z_h, mask_candidate_hidden);
}

/// Dispatch on the weight variant. `z_x`/`z_h` may be null.
inline StepOut cell_step(const CellWeights& w, const Vector& x, const CellState& state,
                         const MaskVector* z_x, const MaskVector* z_h,
                         bool mask_gru_candidate_hidden = false) {
  if (const auto* v = std::get_if<VanillaWeights>(&w))
    return vanilla_step_masked(*v, x, state, z_x, z_h);
  if (const auto* l = std::get_if<LstmWeights>(&w))
    return lstm_step_masked(*l, x, state, z_x, z_h);
  return gru_step_masked(std::get<GruWeights>(w), x, state, z_x, z_h,
                         mask_gru_candidate_hidden);
}

inline CellState initial_state(CellKind kind, std::size_t hidden_dim) {
  CellState s;
  s.h.assign(hidden_dim, 0.0);
  if (kind == CellKind::lstm) s.c.assign(hidden_dim, 0.0);
  return s;
}

// ---------------------------------------------------------------------------
// Backward steps: exact reverse-mode differentiation of the forward caches.
// Masks recorded in the tape participate as constants. Weight gradients
// accumulate into `acc`; the return value carries gradients for x_t, h_{t-1}
// and (LSTM) c_{t-1}.
// ---------------------------------------------------------------------------

namespace detail {

inline StepInputGrads vanilla_backward(const VanillaWeights& w, const TapeStep& t,
                                       const Vector& grad_h, VanillaWeights& acc) {
  // d pre = gh ⊙ (1 - h²)
  Vector d_pre(grad_h.size());
  for (std::size_t i = 0; i < d_pre.size(); ++i)
    d_pre[i] = grad_h[i] * (1.0 - t.h_t[i] * t.h_t[i]);

  add_outer(acc.w_x, d_pre, t.x_used);
  add_outer(acc.w_h, d_pre, t.h_prev_used);
  add_into(acc.b, d_pre);

  StepInputGrads g;
  g.d_x = chain_mask(matvec_transposed(w.w_x, d_pre), t.z_x);
  g.d_h_prev = chain_mask(matvec_transposed(w.w_h, d_pre), t.z_h);
  return g;
}

inline StepInputGrads lstm_backward(const LstmWeights& w, const TapeStep& t,
                                    const Vector& grad_h, const Vector* grad_c,
                                    LstmWeights& acc) {
  const std::size_t h = grad_h.size();
  Vector d_c(h, 0.0);
  if (grad_c) {
    check_len(*grad_c, d_c, "lstm_backward grad_c");
    d_c = *grad_c;
  }
  // h = o ⊙ tanh(c)
  Vector d_o_pre(h), d_i_pre(h), d_f_pre(h), d_g_pre(h);
  for (std::size_t i = 0; i < h; ++i) {
    const double go = grad_h[i] * t.tanh_c[i];
    d_o_pre[i] = go * t.gate_o[i] * (1.0 - t.gate_o[i]);
    d_c[i] += grad_h[i] * t.gate_o[i] * (1.0 - t.tanh_c[i] * t.tanh_c[i]);
  }
  StepInputGrads g;
  g.d_c_prev.resize(h);
  for (std::size_t i = 0; i < h; ++i) {
    d_f_pre[i] = d_c[i] * t.c_prev[i] * t.gate_f[i] * (1.0 - t.gate_f[i]);
    d_i_pre[i] = d_c[i] * t.candidate[i] * t.gate_i[i] * (1.0 - t.gate_i[i]);
    d_g_pre[i] = d_c[i] * t.gate_i[i] * (1.0 - t.candidate[i] * t.candidate[i]);
    g.d_c_prev[i] = d_c[i] * t.gate_f[i];
  }

  Vector d_x_used(t.x_used.size(), 0.0);
  Vector d_h_used(t.h_prev_used.size(), 0.0);
  auto accumulate_gate = [&](const Matrix& wx, const Matrix& wh, Matrix& gx, Matrix& gh_,
                             Vector& gb, const Vector& d_pre) {
    add_outer(gx, d_pre, t.x_used);
    add_outer(gh_, d_pre, t.h_prev_used);
    add_into(gb, d_pre);
    add_into(d_x_used, matvec_transposed(wx, d_pre));
    add_into(d_h_used, matvec_transposed(wh, d_pre));
  };
  accumulate_gate(w.w_xi, w.w_hi, acc.w_xi, acc.w_hi, acc.b_i, d_i_pre);
  accumulate_gate(w.w_xf, w.w_hf, acc.w_xf, acc.w_hf, acc.b_f, d_f_pre);
  accumulate_gate(w.w_xo, w.w_ho, acc.w_xo, acc.w_ho, acc.b_o, d_o_pre);
  accumulate_gate(w.w_xg, w.w_hg, acc.w_xg, acc.w_hg, acc.b_g, d_g_pre);

  g.d_x = chain_mask(std::move(d_x_used), t.z_x);
  g.d_h_prev = chain_mask(std::move(d_h_used), t.z_h);
  return g;
}

inline StepInputGrads gru_backward(const GruWeights& w, const TapeStep& t, const Vector& grad_h,
                                   GruWeights& acc) {
  const std::size_t h = grad_h.size();
  // h_t = (1-z) ⊙ h_prev + z ⊙ g
  Vector d_z_pre(h), d_g_pre(h);
  StepInputGrads g;
  g.d_h_prev.assign(h, 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    const double gz = grad_h[i] * (t.candidate[i] - t.h_prev[i]);
    d_z_pre[i] = gz * t.gate_z[i] * (1.0 - t.gate_z[i]);
    d_g_pre[i] = grad_h[i] * t.gate_z[i] * (1.0 - t.candidate[i] * t.candidate[i]);
    g.d_h_prev[i] = grad_h[i] * (1.0 - t.gate_z[i]);
  }

  // candidate path: g = tanh(w_xg x̂ + w_hg (r ⊙ h~))
  Vector d_cand_hidden = matvec_transposed(w.w_hg, d_g_pre);
  const Vector& cand_h_src = t.candidate_hidden_masked ? t.h_prev_used : t.h_prev;
  Vector d_r_pre(h);
  for (std::size_t i = 0; i < h; ++i) {
    const double gr = d_cand_hidden[i] * cand_h_src[i];
    d_r_pre[i] = gr * t.gate_r[i] * (1.0 - t.gate_r[i]);
  }
  // h_prev through the candidate's r ⊙ h~ product
  Vector d_cand_h_src(h);
  for (std::size_t i = 0; i < h; ++i) d_cand_h_src[i] = d_cand_hidden[i] * t.gate_r[i];
  if (t.candidate_hidden_masked)
    add_into(g.d_h_prev, chain_mask(std::move(d_cand_h_src), t.z_h));
  else
    add_into(g.d_h_prev, d_cand_h_src);

  Vector d_x_used(t.x_used.size(), 0.0);
  Vector d_h_used(t.h_prev_used.size(), 0.0);
  auto accumulate_gate = [&](const Matrix& wx, const Matrix& wh, Matrix& gx, Matrix& gh_,
                             Vector& gb, const Vector& d_pre) {
    add_outer(gx, d_pre, t.x_used);
    add_outer(gh_, d_pre, t.h_prev_used);
    add_into(gb, d_pre);
    add_into(d_x_used, matvec_transposed(wx, d_pre));
    add_into(d_h_used, matvec_transposed(wh, d_pre));
  };
  accumulate_gate(w.w_xz, w.w_hz, acc.w_xz, acc.w_hz, acc.b_z, d_z_pre);
  accumulate_gate(w.w_xr, w.w_hr, acc.w_xr, acc.w_hr, acc.b_r, d_r_pre);

  add_outer(acc.w_xg, d_g_pre, t.x_used);
  add_outer(acc.w_hg, d_g_pre, t.cand_hidden);
  add_into(acc.b_g, d_g_pre);
  add_into(d_x_used, matvec_transposed(w.w_xg, d_g_pre));

  g.d_x = chain_mask(std::move(d_x_used), t.z_x);
  add_into(g.d_h_prev, chain_mask(std::move(d_h_used), t.z_h));
  return g;
}

}  // namespace detail

inline StepInputGrads backward_step(const CellWeights& w, const TapeStep& tape,
                                    const Vector& grad_h_next, const Vector* grad_c_next,
                                    CellWeights& acc) {
  if (cell_kind_of(w) != tape.kind || cell_kind_of(acc) != tape.kind)
    throw shape_error(std::string("backward_step: tape for ") + to_string(tape.kind) +
                      " does not match cell kind " + to_string(cell_kind_of(w)));
  switch (tape.kind) {
    case CellKind::vanilla:
      return detail::vanilla_backward(std::get<VanillaWeights>(w), tape, grad_h_next,
                                      std::get<VanillaWeights>(acc));
    case CellKind::lstm:
      return detail::lstm_backward(std::get<LstmWeights>(w), tape, grad_h_next, grad_c_next,
                                   std::get<LstmWeights>(acc));
    case CellKind::gru:
      return detail::gru_backward(std::get<GruWeights>(w), tape, grad_h_next,
                                  std::get<GruWeights>(acc));
  }
  throw shape_error("backward_step: unknown cell kind");
}

}  // namespace varnn
