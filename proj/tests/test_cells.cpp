#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "varnn/cells.hpp"

using namespace varnn;

namespace {

MaskVector identity_mask(std::size_t n) {
  MaskVector m;
  m.drop_prob = 0.0;
  m.values.assign(n, 1.0);
  return m;
}

MaskVector zero_mask(std::size_t n) {
  MaskVector m;
  m.drop_prob = 0.5;
  m.values.assign(n, 0.0);
  return m;
}

CellWeights zero_weights(CellKind kind, std::size_t e, std::size_t h) {
  return make_cell_weights(kind, e, h);
}

}  // namespace

TEST_CASE("vanilla step") {
  SUBCASE("all-zero parameters give zero output") {
    auto w = std::get<VanillaWeights>(zero_weights(CellKind::vanilla, 3, 2));
    CellState s = initial_state(CellKind::vanilla, 2);
    s.h = {0.7, -0.3};
    auto out = vanilla_step(w, Vector{1, 2, 3}, s);
    CHECK(out.state.h == Vector{0, 0});
  }
  SUBCASE("bias only gives tanh(b)") {
    auto w = std::get<VanillaWeights>(zero_weights(CellKind::vanilla, 1, 1));
    w.b = {0.5};
    auto out = vanilla_step(w, Vector{2.0}, CellState{{0.0}, {}});
    CHECK(out.state.h[0] == doctest::Approx(0.46212).epsilon(1e-5));
  }
  SUBCASE("outputs stay inside (-1, 1)") {
    Rng rng(4);
    auto w = std::get<VanillaWeights>(testsupport::random_cell(CellKind::vanilla, 4, 3, rng, 1.5));
    for (int trial = 0; trial < 30; ++trial) {
      CellState s{testsupport::random_vector(3, rng, 1.0), {}};
      auto out = vanilla_step(w, testsupport::random_vector(4, rng, 2.0), s);
      for (double v : out.state.h) {
        CHECK(v > -1.0);
        CHECK(v < 1.0);
      }
    }
    // extreme pre-activations saturate but never escape [-1, 1]
    auto big = std::get<VanillaWeights>(testsupport::random_cell(CellKind::vanilla, 4, 3, rng, 50.0));
    auto out = vanilla_step(big, testsupport::random_vector(4, rng, 50.0), CellState{{0, 0, 0}, {}});
    for (double v : out.state.h) CHECK(std::abs(v) <= 1.0);
  }
}

TEST_CASE("lstm step hand values") {
  SUBCASE("all zeros: gates 0.5, state stays zero") {
    auto w = std::get<LstmWeights>(zero_weights(CellKind::lstm, 2, 1));
    auto out = lstm_step(w, Vector{0.3, -0.4}, initial_state(CellKind::lstm, 1));
    CHECK(out.tape.gate_i == Vector{0.5});
    CHECK(out.tape.gate_f == Vector{0.5});
    CHECK(out.tape.gate_o == Vector{0.5});
    CHECK(out.tape.candidate == Vector{0.0});
    CHECK(out.state.c == Vector{0.0});
    CHECK(out.state.h == Vector{0.0});
  }
  SUBCASE("zero weights with c_prev=1") {
    auto w = std::get<LstmWeights>(zero_weights(CellKind::lstm, 2, 1));
    CellState s;
    s.h = {0.0};
    s.c = {1.0};
    auto out = lstm_step(w, Vector{1.0, 1.0}, s);
    CHECK(out.state.c[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(out.state.h[0] == doctest::Approx(0.23106).epsilon(1e-4));
  }
  SUBCASE("c_t bounded by |c_prev| + 1 elementwise") {
    Rng rng(6);
    auto w = std::get<LstmWeights>(testsupport::random_cell(CellKind::lstm, 3, 4, rng, 4.0));
    for (int trial = 0; trial < 30; ++trial) {
      CellState s{testsupport::random_vector(4, rng, 2.0), testsupport::random_vector(4, rng, 3.0)};
      auto out = lstm_step(w, testsupport::random_vector(3, rng, 5.0), s);
      for (std::size_t i = 0; i < 4; ++i)
        CHECK(std::abs(out.state.c[i]) <= std::abs(s.c[i]) + 1.0);
    }
  }
  SUBCASE("missing memory vector") {
    auto w = std::get<LstmWeights>(zero_weights(CellKind::lstm, 2, 2));
    CellState s;
    s.h = {0.0, 0.0};
    CHECK_THROWS_AS(lstm_step(w, Vector{1, 2}, s), shape_error);
  }
}

TEST_CASE("lstm variational masks") {
  Rng rng(8);
  auto w = std::get<LstmWeights>(testsupport::random_cell(CellKind::lstm, 3, 2, rng));
  CellState s{testsupport::random_vector(2, rng), testsupport::random_vector(2, rng)};
  Vector x = testsupport::random_vector(3, rng);

  SUBCASE("all-zero masks: gates see only the bias") {
    w.b_i.assign(2, 0.0);
    w.b_f.assign(2, 0.0);
    w.b_o.assign(2, 0.0);
    w.b_g.assign(2, 0.0);
    auto zx = zero_mask(3), zh = zero_mask(2);
    auto out1 = lstm_step_variational(w, x, s, zx, zh);
    auto out2 = lstm_step_variational(w, Vector{9, 9, 9},
                                      CellState{Vector{5, -5}, s.c}, zx, zh);
    CHECK(out1.tape.gate_i == Vector{0.5, 0.5});
    CHECK(out1.tape.gate_i == out2.tape.gate_i);
    CHECK(out1.tape.gate_f == out2.tape.gate_f);
    CHECK(out1.tape.candidate == out2.tape.candidate);
  }
  SUBCASE("identity masks collapse onto the plain step") {
    auto zx = identity_mask(3), zh = identity_mask(2);
    auto plain = lstm_step(w, x, s);
    auto masked = lstm_step_variational(w, x, s, zx, zh);
    CHECK(masked.state.h == plain.state.h);
    CHECK(masked.state.c == plain.state.c);
  }
  SUBCASE("a dropped input unit silences the same weight columns at every step") {
    MaskVector zx = identity_mask(3);
    zx.values[1] = 0.0;
    MaskVector zh = identity_mask(2);
    CellState state = s;
    for (int t = 0; t < 3; ++t) {
      auto out = lstm_step_variational(w, testsupport::random_vector(3, rng), state, zx, zh);
      CHECK(out.tape.x_used[1] == 0.0);  // column 1 of every w_x* multiplies zero
      state = out.state;
    }
  }
  SUBCASE("mask length mismatch") {
    auto zx = identity_mask(4);
    auto zh = identity_mask(2);
    CHECK_THROWS_AS(lstm_step_variational(w, x, s, zx, zh), shape_error);
  }
}

TEST_CASE("gru step hand values") {
  SUBCASE("all zeros stay zero") {
    auto w = std::get<GruWeights>(zero_weights(CellKind::gru, 2, 1));
    auto out = gru_step(w, Vector{1, -1}, initial_state(CellKind::gru, 1));
    CHECK(out.state.h == Vector{0.0});
  }
  SUBCASE("zero weights with h_prev=0.8 halve the state") {
    auto w = std::get<GruWeights>(zero_weights(CellKind::gru, 2, 1));
    CellState s;
    s.h = {0.8};
    auto out = gru_step(w, Vector{1, 1}, s);
    CHECK(out.tape.gate_z == Vector{0.5});
    CHECK(out.tape.gate_r == Vector{0.5});
    CHECK(out.tape.candidate == Vector{0.0});
    CHECK(out.state.h[0] == doctest::Approx(0.4).epsilon(1e-12));
  }
  SUBCASE("update is a convex combination per unit") {
    Rng rng(10);
    auto w = std::get<GruWeights>(testsupport::random_cell(CellKind::gru, 3, 4, rng, 3.0));
    for (int trial = 0; trial < 30; ++trial) {
      CellState s{testsupport::random_vector(4, rng, 2.0), {}};
      auto out = gru_step(w, testsupport::random_vector(3, rng, 4.0), s);
      for (std::size_t i = 0; i < 4; ++i) {
        const double lo = std::min(s.h[i], out.tape.candidate[i]);
        const double hi = std::max(s.h[i], out.tape.candidate[i]);
        CHECK(out.state.h[i] >= lo - 1e-12);
        CHECK(out.state.h[i] <= hi + 1e-12);
      }
    }
  }
  SUBCASE("rejects a memory vector") {
    auto w = std::get<GruWeights>(zero_weights(CellKind::gru, 2, 2));
    CellState s{Vector{0, 0}, Vector{0, 0}};
    CHECK_THROWS_AS(gru_step(w, Vector{1, 2}, s), shape_error);
  }
}

TEST_CASE("gru variational masks") {
  Rng rng(12);
  auto w = std::get<GruWeights>(testsupport::random_cell(CellKind::gru, 3, 2, rng));
  CellState s{testsupport::random_vector(2, rng), {}};
  Vector x = testsupport::random_vector(3, rng);

  SUBCASE("identity masks collapse onto the plain step") {
    auto zx = identity_mask(3), zh = identity_mask(2);
    CHECK(gru_step_variational(w, x, s, zx, zh).state.h == gru_step(w, x, s).state.h);
  }
  SUBCASE("zero z_x makes gates depend only on the hidden paths") {
    auto zx = zero_mask(3);
    auto zh = identity_mask(2);
    auto a = gru_step_variational(w, x, s, zx, zh);
    auto b = gru_step_variational(w, Vector{7, -7, 7}, s, zx, zh);
    CHECK(a.tape.gate_z == b.tape.gate_z);
    CHECK(a.tape.gate_r == b.tape.gate_r);
    CHECK(a.tape.candidate == b.tape.candidate);
    CHECK(a.state.h == b.state.h);
  }
  SUBCASE("unmasked candidate hidden path still sees a dropped unit") {
    MaskVector zx = identity_mask(3);
    MaskVector zh = identity_mask(2);
    zh.values[0] = 0.0;
    CellState s2 = s;
    s2.h[0] += 0.25;  // perturb the dropped unit
    auto a = gru_step_variational(w, x, s, zx, zh, false);
    auto b = gru_step_variational(w, x, s2, zx, zh, false);
    CHECK(a.tape.gate_z == b.tape.gate_z);  // z, r blind to the dropped unit
    CHECK(a.tape.gate_r == b.tape.gate_r);
    CHECK(a.tape.candidate != b.tape.candidate);  // candidate path is unmasked
    // with the flag on the candidate goes blind too
    auto c = gru_step_variational(w, x, s, zx, zh, true);
    auto d = gru_step_variational(w, x, s2, zx, zh, true);
    CHECK(c.tape.candidate == d.tape.candidate);
  }
}

TEST_CASE("backward_step") {
  Rng rng(14);
  SUBCASE("zero upstream gradient gives zero everywhere") {
    for (CellKind kind : {CellKind::vanilla, CellKind::lstm, CellKind::gru}) {
      CellWeights w = testsupport::random_cell(kind, 3, 2, rng);
      CellState s = initial_state(kind, 2);
      s.h = testsupport::random_vector(2, rng);
      StepOut out = cell_step(w, testsupport::random_vector(3, rng), s, nullptr, nullptr);
      CellWeights acc = make_cell_weights(kind, 3, 2);
      Vector gh(2, 0.0), gc(2, 0.0);
      StepInputGrads g = backward_step(w, out.tape, gh, kind == CellKind::lstm ? &gc : nullptr,
                                       acc);
      CHECK(g.d_x == Vector{0, 0, 0});
      CHECK(g.d_h_prev == Vector{0, 0});
      std::vector<TensorRef> refs;
      detail::collect_cell_tensors(refs, acc, "");
      for (auto& ref : refs) {
        if (ref.mat)
          CHECK(sum_sq(*ref.mat) == 0.0);
        else
          CHECK(sum_sq(*ref.vec) == 0.0);
      }
    }
  }

  SUBCASE("single-step weight gradients match central differences") {
    // loss = sum_i coef_i * h_i for a fixed random coefficient vector
    const double step = 1e-5;
    for (CellKind kind : {CellKind::vanilla, CellKind::lstm, CellKind::gru}) {
      CellWeights w = testsupport::random_cell(kind, 3, 2, rng);
      CellState s = initial_state(kind, 2);
      s.h = testsupport::random_vector(2, rng);
      Vector x = testsupport::random_vector(3, rng);
      Vector coef = testsupport::random_vector(2, rng, 1.0);

      auto loss = [&](const CellWeights& ww) {
        StepOut o = cell_step(ww, x, s, nullptr, nullptr);
        double acc = 0;
        for (std::size_t i = 0; i < 2; ++i) acc += coef[i] * o.state.h[i];
        return acc;
      };

      StepOut out = cell_step(w, x, s, nullptr, nullptr);
      CellWeights acc = make_cell_weights(kind, 3, 2);
      Vector gc(2, 0.0);
      backward_step(w, out.tape, coef, kind == CellKind::lstm ? &gc : nullptr, acc);

      std::vector<TensorRef> wrefs, grefs;
      detail::collect_cell_tensors(wrefs, w, "");
      detail::collect_cell_tensors(grefs, acc, "");
      for (std::size_t r = 0; r < wrefs.size(); ++r) {
        auto& values = wrefs[r].mat ? wrefs[r].mat->data() : *wrefs[r].vec;
        auto& grads = grefs[r].mat ? grefs[r].mat->data() : *grefs[r].vec;
        for (std::size_t k = 0; k < values.size(); ++k) {
          const double saved = values[k];
          values[k] = saved + step;
          const double plus = loss(w);
          values[k] = saved - step;
          const double minus = loss(w);
          values[k] = saved;
          const double numeric = (plus - minus) / (2 * step);
          const double denom = std::max({1e-5, std::abs(numeric), std::abs(grads[k])});
          CHECK(std::abs(numeric - grads[k]) / denom < 1e-4);
        }
      }
    }
  }

  SUBCASE("weight columns masked at every step get zero gradient") {
    for (CellKind kind : {CellKind::vanilla, CellKind::lstm, CellKind::gru}) {
      CellWeights w = testsupport::random_cell(kind, 4, 3, rng);
      MaskVector zx;
      zx.drop_prob = 0.5;
      zx.values = {2.0, 0.0, 2.0, 0.0};
      MaskVector zh;
      zh.drop_prob = 0.5;
      zh.values = {2.0, 2.0, 0.0};

      CellState s = initial_state(kind, 3);
      std::vector<TapeStep> tapes;
      for (int t = 0; t < 3; ++t) {
        StepOut o = cell_step(w, testsupport::random_vector(4, rng), s, &zx, &zh);
        tapes.push_back(o.tape);
        s = o.state;
      }
      CellWeights acc = make_cell_weights(kind, 4, 3);
      Vector gh = testsupport::random_vector(3, rng), gc(3, 0.0);
      for (int t = 2; t >= 0; --t) {
        StepInputGrads g = backward_step(w, tapes[static_cast<std::size_t>(t)], gh,
                                         kind == CellKind::lstm ? &gc : nullptr, acc);
        gh = g.d_h_prev;
        if (kind == CellKind::lstm) gc = g.d_c_prev;
      }
      std::vector<TensorRef> grefs;
      detail::collect_cell_tensors(grefs, acc, "");
      for (auto& ref : grefs) {
        if (!ref.mat) continue;
        const bool input_side = ref.mat->cols() == 4;
        for (std::size_t r = 0; r < ref.mat->rows(); ++r)
          for (std::size_t c = 0; c < ref.mat->cols(); ++c) {
            const bool dropped = input_side ? zx.values[c] == 0.0 : zh.values[c] == 0.0;
            // GRU's w_hg multiplies r ⊙ h_prev, which z_h does not cover by
            // default
            if (ref.name == "w_hg" && kind == CellKind::gru) continue;
            if (dropped) CHECK((*ref.mat)(r, c) == 0.0);
          }
      }
    }
  }

  SUBCASE("tape and cell kind must match") {
    auto wv = testsupport::random_cell(CellKind::vanilla, 2, 2, rng);
    auto wl = testsupport::random_cell(CellKind::lstm, 2, 2, rng);
    StepOut o = cell_step(wv, Vector{1, 2}, initial_state(CellKind::vanilla, 2), nullptr,
                          nullptr);
    CellWeights acc = make_cell_weights(CellKind::lstm, 2, 2);
    Vector gh(2, 0.0);
    CHECK_THROWS_AS(backward_step(wl, o.tape, gh, nullptr, acc), shape_error);
  }
}

TEST_CASE("steps are deterministic") {
  Rng rng(99);
  for (CellKind kind : {CellKind::vanilla, CellKind::lstm, CellKind::gru}) {
    CellWeights w = testsupport::random_cell(kind, 3, 3, rng);
    CellState s = initial_state(kind, 3);
    Vector x = testsupport::random_vector(3, rng);
    auto a = cell_step(w, x, s, nullptr, nullptr);
    auto b = cell_step(w, x, s, nullptr, nullptr);
    CHECK(a.state.h == b.state.h);
    CHECK(a.state.c == b.state.c);
  }
}
