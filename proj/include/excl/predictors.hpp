#pragma once

#include <optional>
#include <string>

#include "excl/lstm.hpp"

namespace excl {

/// Span predictor head: a = MLP, b = tied LSTM, c = conditioned LSTM.
enum class PredictorKind { mlp, tied, conditioned };

inline char predictor_letter(PredictorKind k) {
  switch (k) {
    case PredictorKind::mlp: return 'a';
    case PredictorKind::tied: return 'b';
    case PredictorKind::conditioned: return 'c';
  }
  return '?';
}

inline PredictorKind predictor_from_letter(char c) {
  switch (c) {
    case 'a': return PredictorKind::mlp;
    case 'b': return PredictorKind::tied;
    case 'c': return PredictorKind::conditioned;
    default: throw ShapeError(std::string("unknown predictor variant '") + c + "' (allowed: a, b, c)");
  }
}

/// One tanh hidden layer followed by a scalar linear output.
template <typename Scalar>
struct MlpHead {
  Parameter<Scalar>* w1 = nullptr;  // hidden x in
  Parameter<Scalar>* b1 = nullptr;  // hidden x 1
  Parameter<Scalar>* w2 = nullptr;  // 1 x hidden
  Parameter<Scalar>* b2 = nullptr;  // 1 x 1
};

/// Single affine map to a scalar score.
template <typename Scalar>
struct LinearHead {
  Parameter<Scalar>* w = nullptr;  // 1 x in
  Parameter<Scalar>* b = nullptr;  // 1 x 1
};

/// Exactly the parameters the active variant uses.
template <typename Scalar>
struct PredictorParams {
  PredictorKind kind = PredictorKind::mlp;
  std::optional<MlpHead<Scalar>> start_mlp, end_mlp;          // a, b
  std::optional<LstmParams<Scalar>> lstm;                     // b; LSTM_start for c
  std::optional<LstmParams<Scalar>> end_lstm;                 // c
  std::optional<LinearHead<Scalar>> start_linear, end_linear;  // c
};

struct PredictorDims {
  Eigen::Index video_dim = 0;  // columns of h^V
  Eigen::Index query_dim = 0;  // length of h^T
  Eigen::Index lstm_hidden = 128;
  Eigen::Index mlp_hidden = 256;
};

namespace detail {
template <typename Scalar>
Matrix<Scalar> uniform_init(Eigen::Index r, Eigen::Index c, double k, Rng& rng) {
  Matrix<Scalar> m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = static_cast<Scalar>(rng.uniform(-k, k));
  return m;
}
}  // namespace detail

template <typename Scalar>
MlpHead<Scalar> make_mlp_head(ParameterStore<Scalar>& store, const std::string& prefix, Eigen::Index in,
                              Eigen::Index hidden, Rng& rng) {
  const double k1 = 1.0 / std::sqrt(static_cast<double>(in));
  const double k2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  MlpHead<Scalar> h;
  h.w1 = &store.add(prefix + ".w1", detail::uniform_init<Scalar>(hidden, in, k1, rng));
  h.b1 = &store.add(prefix + ".b1", detail::uniform_init<Scalar>(hidden, 1, k1, rng));
  h.w2 = &store.add(prefix + ".w2", detail::uniform_init<Scalar>(1, hidden, k2, rng));
  h.b2 = &store.add(prefix + ".b2", detail::uniform_init<Scalar>(1, 1, k2, rng));
  return h;
}

template <typename Scalar>
LinearHead<Scalar> make_linear_head(ParameterStore<Scalar>& store, const std::string& prefix, Eigen::Index in,
                                    Rng& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(in));
  LinearHead<Scalar> h;
  h.w = &store.add(prefix + ".w", detail::uniform_init<Scalar>(1, in, k, rng));
  h.b = &store.add(prefix + ".b", detail::uniform_init<Scalar>(1, 1, k, rng));
  return h;
}

/// Registers the parameters of one predictor variant under "pred.*".
template <typename Scalar>
PredictorParams<Scalar> make_predictor(ParameterStore<Scalar>& store, PredictorKind kind, const PredictorDims& d,
                                       Rng& rng) {
  PredictorParams<Scalar> p;
  p.kind = kind;
  const Eigen::Index base = d.video_dim + d.query_dim;
  const Eigen::Index with_state = 2 * d.lstm_hidden + base;
  switch (kind) {
    case PredictorKind::mlp:
      p.start_mlp = make_mlp_head(store, "pred.start_mlp", base, d.mlp_hidden, rng);
      p.end_mlp = make_mlp_head(store, "pred.end_mlp", base, d.mlp_hidden, rng);
      break;
    case PredictorKind::tied:
      p.lstm = make_bilstm(store, "pred.lstm", base, d.lstm_hidden, rng);
      p.start_mlp = make_mlp_head(store, "pred.start_mlp", with_state, d.mlp_hidden, rng);
      p.end_mlp = make_mlp_head(store, "pred.end_mlp", with_state, d.mlp_hidden, rng);
      break;
    case PredictorKind::conditioned:
      p.lstm = make_bilstm(store, "pred.lstm", base, d.lstm_hidden, rng);
      p.end_lstm = make_bilstm(store, "pred.end_lstm", 2 * d.lstm_hidden, d.lstm_hidden, rng);
      p.start_linear = make_linear_head(store, "pred.start_linear", with_state, rng);
      p.end_linear = make_linear_head(store, "pred.end_linear", with_state, rng);
      break;
  }
  return p;
}

/// Rebinds a predictor to parameters already present in `store`.
template <typename Scalar>
PredictorParams<Scalar> find_predictor(ParameterStore<Scalar>& store, PredictorKind kind) {
  auto mlp = [&](const std::string& pre) {
    return MlpHead<Scalar>{&store.at(pre + ".w1"), &store.at(pre + ".b1"), &store.at(pre + ".w2"),
                           &store.at(pre + ".b2")};
  };
  auto lin = [&](const std::string& pre) { return LinearHead<Scalar>{&store.at(pre + ".w"), &store.at(pre + ".b")}; };
  PredictorParams<Scalar> p;
  p.kind = kind;
  if (kind != PredictorKind::conditioned) {
    p.start_mlp = mlp("pred.start_mlp");
    p.end_mlp = mlp("pred.end_mlp");
  }
  if (kind != PredictorKind::mlp) p.lstm = find_bilstm(store, "pred.lstm");
  if (kind == PredictorKind::conditioned) {
    p.end_lstm = find_bilstm(store, "pred.end_lstm");
    p.start_linear = lin("pred.start_linear");
    p.end_linear = lin("pred.end_linear");
  }
  return p;
}

/// Per-frame start/end scores, each T x 1.
template <typename Scalar>
struct SpanScoresVar {
  Var<Scalar> start;
  Var<Scalar> end;
};

template <typename Scalar>
Var<Scalar> apply_mlp(const MlpHead<Scalar>& h, Var<Scalar> x) {
  Tape<Scalar>& t = *x.tape;
  Var<Scalar> hidden = tanh(affine(x, t.parameter(*h.w1), t.parameter(*h.b1)));
  return affine(hidden, t.parameter(*h.w2), t.parameter(*h.b2));
}

template <typename Scalar>
Var<Scalar> apply_linear(const LinearHead<Scalar>& h, Var<Scalar> x) {
  Tape<Scalar>& t = *x.tape;
  return affine(x, t.parameter(*h.w), t.parameter(*h.b));
}

namespace detail {
/// [h^V_t ; h^T] for every frame.
template <typename Scalar>
Var<Scalar> frame_inputs(Var<Scalar> hv, Var<Scalar> ht) {
  if (ht.rows() != 1) throw ShapeError("predictor: h^T must be a single row, got " + to_string(ht.shape()));
  return concat({hv, repeat_rows(ht, hv.rows())});
}
}  // namespace detail

/// Variant a: S(t) = MLP([h^V_t ; h^T]), separate start and end MLPs.
template <typename Scalar>
SpanScoresVar<Scalar> predict_mlp(Var<Scalar> hv, Var<Scalar> ht, const PredictorParams<Scalar>& p) {
  if (!p.start_mlp || !p.end_mlp) throw ShapeError("predict_mlp: MLP heads missing");
  Var<Scalar> x = detail::frame_inputs(hv, ht);
  return {apply_mlp(*p.start_mlp, x), apply_mlp(*p.end_mlp, x)};
}

template <typename Scalar>
struct TiedOutput {
  SpanScoresVar<Scalar> scores;
  Var<Scalar> states;  // h^P, T x 2H
};

/// Variant b: h^P = BiLSTM([h^V_t ; h^T]); S(t) = MLP([h^P_t ; h^V_t ; h^T]).
template <typename Scalar>
TiedOutput<Scalar> predict_tied(Var<Scalar> hv, Var<Scalar> ht, const PredictorParams<Scalar>& p,
                                const DropoutSpec& drop = {}) {
  if (!p.lstm || !p.start_mlp || !p.end_mlp) throw ShapeError("predict_tied: parameters missing");
  Var<Scalar> x = detail::frame_inputs(hv, ht);
  Var<Scalar> hp = bilstm_forward(x, *p.lstm, drop).states;
  Var<Scalar> z = concat({hp, x});
  return {{apply_mlp(*p.start_mlp, z), apply_mlp(*p.end_mlp, z)}, hp};
}

template <typename Scalar>
struct ConditionedOutput {
  SpanScoresVar<Scalar> scores;
  Var<Scalar> start_states;  // h^{P0}
  Var<Scalar> end_states;    // h^{P1}
};

/// Variant c: h^{P0} = BiLSTM_start([h^V_t ; h^T]); h^{P1} = BiLSTM_end(h^{P0});
/// S_start = W_s [h^{P0}_t ; h^V_t ; h^T] + b_s, S_end = W_e [h^{P1}_t ; h^V_t ; h^T] + b_e.
template <typename Scalar>
ConditionedOutput<Scalar> predict_conditioned(Var<Scalar> hv, Var<Scalar> ht, const PredictorParams<Scalar>& p,
                                              const DropoutSpec& drop = {}) {
  if (!p.lstm || !p.end_lstm || !p.start_linear || !p.end_linear)
    throw ShapeError("predict_conditioned: parameters missing");
  Var<Scalar> x = detail::frame_inputs(hv, ht);
  Var<Scalar> p0 = bilstm_forward(x, *p.lstm, drop).states;
  Var<Scalar> p1 = bilstm_forward(p0, *p.end_lstm, drop).states;
  return {{apply_linear(*p.start_linear, concat({p0, x})), apply_linear(*p.end_linear, concat({p1, x}))}, p0, p1};
}

template <typename Scalar>
SpanScoresVar<Scalar> predict_spans(Var<Scalar> hv, Var<Scalar> ht, const PredictorParams<Scalar>& p,
                                    const DropoutSpec& drop = {}) {
  switch (p.kind) {
    case PredictorKind::mlp: return predict_mlp(hv, ht, p);
    case PredictorKind::tied: return predict_tied(hv, ht, p, drop).scores;
    case PredictorKind::conditioned: return predict_conditioned(hv, ht, p, drop).scores;
  }
  throw ShapeError("predict_spans: unknown predictor");
}

}  // namespace excl
