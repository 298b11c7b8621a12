#pragma once

#include <memory>
#include <string>

#include "excl/ops.hpp"

namespace excl {

/// One direction of an LSTM. Gate blocks are stacked in the order
/// input, forget, cell, output: w is 4H x D, u is 4H x H, b is 4H x 1.
template <typename Scalar>
struct LstmDirection {
  Parameter<Scalar>* w = nullptr;
  Parameter<Scalar>* u = nullptr;
  Parameter<Scalar>* b = nullptr;

  Eigen::Index hidden() const { return u->value.cols(); }
  Eigen::Index input() const { return w->value.cols(); }
};

/// Forward and backward directions of a bidirectional LSTM.
template <typename Scalar>
struct LstmParams {
  LstmDirection<Scalar> fw;
  LstmDirection<Scalar> bw;

  Eigen::Index hidden() const { return fw.hidden(); }
  Eigen::Index input() const { return fw.input(); }
};

/// Registers `<prefix>.{fw,bw}.{w,u,b}` with U(-1/sqrt(H), 1/sqrt(H)) init.
template <typename Scalar>
LstmParams<Scalar> make_bilstm(ParameterStore<Scalar>& store, const std::string& prefix,
                               Eigen::Index input, Eigen::Index hidden, Rng& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden));
  auto uniform = [&](Eigen::Index r, Eigen::Index c) {
    Matrix<Scalar> m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = static_cast<Scalar>(rng.uniform(-k, k));
    return m;
  };
  auto make_dir = [&](const std::string& d) {
    LstmDirection<Scalar> dir;
    dir.w = &store.add(prefix + "." + d + ".w", uniform(4 * hidden, input));
    dir.u = &store.add(prefix + "." + d + ".u", uniform(4 * hidden, hidden));
    dir.b = &store.add(prefix + "." + d + ".b", uniform(4 * hidden, 1));
    return dir;
  };
  LstmParams<Scalar> p;
  p.fw = make_dir("fw");
  p.bw = make_dir("bw");
  return p;
}

/// Looks up an existing bidirectional LSTM registered under `prefix`.
template <typename Scalar>
LstmParams<Scalar> find_bilstm(ParameterStore<Scalar>& store, const std::string& prefix) {
  auto dir = [&](const std::string& d) {
    return LstmDirection<Scalar>{&store.at(prefix + "." + d + ".w"), &store.at(prefix + "." + d + ".u"),
                                 &store.at(prefix + "." + d + ".b")};
  };
  return LstmParams<Scalar>{dir("fw"), dir("bw")};
}

/// Unidirectional LSTM over the rows of x (T x D) starting from zero hidden
/// and cell state. Returns T x H hidden states; row t is the state after
/// consuming frame t (in `reverse` mode frames are consumed T-1 down to 0).
/// Backward is hand-written truncation-free BPTT.
template <typename Scalar>
Var<Scalar> lstm_sequence(Var<Scalar> x, Var<Scalar> w, Var<Scalar> u, Var<Scalar> b, bool reverse) {
  using Mat = Matrix<Scalar>;
  const Eigen::Index steps = x.rows();
  const Eigen::Index hidden = u.cols();
  if (steps == 0) throw ShapeError("lstm: empty sequence");
  detail::require(w.cols() == x.cols(), "lstm(x, W)", x.shape(), w.shape());
  detail::require(w.rows() == 4 * hidden && u.rows() == 4 * hidden, "lstm(W, U)", w.shape(), u.shape());
  detail::require(b.rows() == 4 * hidden && b.cols() == 1, "lstm(b)", b.shape(), u.shape());

  Tape<Scalar>& tape = *x.tape;

  struct Cache {
    Mat gates;  // 4H x T, post-activation
    Mat cells;  // H x T
    Mat tanh_cells;
    Mat hiddens;
  };
  auto cache = std::make_shared<Cache>();

  const Mat& wv = w.value();
  const Mat& uv = u.value();
  Mat pre = wv * x.value().transpose();
  pre.colwise() += b.value().col(0);

  cache->gates.resize(4 * hidden, steps);
  cache->cells.resize(hidden, steps);
  cache->tanh_cells.resize(hidden, steps);
  cache->hiddens.resize(hidden, steps);

  Vector<Scalar> h = Vector<Scalar>::Zero(hidden);
  Vector<Scalar> c = Vector<Scalar>::Zero(hidden);
  Vector<Scalar> a(4 * hidden);
  for (Eigen::Index k = 0; k < steps; ++k) {
    const Eigen::Index t = reverse ? steps - 1 - k : k;
    a.noalias() = pre.col(t);
    if (k > 0) a.noalias() += uv * h;
    auto gates = cache->gates.col(t);
    gates.segment(0, hidden) = (Scalar(1) / (Scalar(1) + (-a.segment(0, hidden).array()).exp())).matrix();
    gates.segment(hidden, hidden) =
        (Scalar(1) / (Scalar(1) + (-a.segment(hidden, hidden).array()).exp())).matrix();
    gates.segment(2 * hidden, hidden) = a.segment(2 * hidden, hidden).array().tanh().matrix();
    gates.segment(3 * hidden, hidden) =
        (Scalar(1) / (Scalar(1) + (-a.segment(3 * hidden, hidden).array()).exp())).matrix();
    c = gates.segment(hidden, hidden).cwiseProduct(c) +
        gates.segment(0, hidden).cwiseProduct(gates.segment(2 * hidden, hidden));
    cache->cells.col(t) = c;
    cache->tanh_cells.col(t) = c.array().tanh().matrix();
    h = gates.segment(3 * hidden, hidden).cwiseProduct(cache->tanh_cells.col(t));
    cache->hiddens.col(t) = h;
  }

  Mat out = cache->hiddens.transpose();
  const bool rg = tape.requires_grad(x) || tape.requires_grad(w) || tape.requires_grad(u) ||
                  tape.requires_grad(b);
  if (!rg || !tape.recording()) cache.reset();

  return tape.push(
      "lstm", std::move(out), rg, [x, w, u, b, reverse, cache](Tape<Scalar>& t, Var<Scalar> self) {
        const Mat& g_out = t.grad(self);
        const Mat& uv = t.value(u);
        const Eigen::Index steps = g_out.rows();
        const Eigen::Index H = uv.cols();
        Mat d_pre(4 * H, steps);
        Mat h_prev = Mat::Zero(H, steps);
        Vector<Scalar> dh_next = Vector<Scalar>::Zero(H);
        Vector<Scalar> dc_next = Vector<Scalar>::Zero(H);
        Vector<Scalar> dh(H), dc(H);
        for (Eigen::Index k = steps - 1; k >= 0; --k) {
          const Eigen::Index t_now = reverse ? steps - 1 - k : k;
          const Eigen::Index t_prev = reverse ? t_now + 1 : t_now - 1;
          const auto gates = cache->gates.col(t_now);
          const auto ig = gates.segment(0, H).array();
          const auto fg = gates.segment(H, H).array();
          const auto gg = gates.segment(2 * H, H).array();
          const auto og = gates.segment(3 * H, H).array();
          const auto tc = cache->tanh_cells.col(t_now).array();

          dh = g_out.row(t_now).transpose() + dh_next;
          dc = (dh.array() * og * (Scalar(1) - tc.square())).matrix() + dc_next;
          auto col = d_pre.col(t_now);
          if (k > 0) {
            const auto c_prev = cache->cells.col(t_prev).array();
            col.segment(H, H) = (dc.array() * c_prev * fg * (Scalar(1) - fg)).matrix();
            h_prev.col(t_now) = cache->hiddens.col(t_prev);
          } else {
            col.segment(H, H).setZero();
          }
          col.segment(0, H) = (dc.array() * gg * ig * (Scalar(1) - ig)).matrix();
          col.segment(2 * H, H) = (dc.array() * ig * (Scalar(1) - gg.square())).matrix();
          col.segment(3 * H, H) = (dh.array() * tc * og * (Scalar(1) - og)).matrix();
          dc_next = (dc.array() * fg).matrix();
          dh_next.noalias() = uv.transpose() * col;
        }
        if (t.requires_grad(w)) t.grad(w).noalias() += d_pre * t.value(x);
        if (t.requires_grad(u)) t.grad(u).noalias() += d_pre * h_prev.transpose();
        if (t.requires_grad(b)) t.grad(b) += d_pre.rowwise().sum();
        if (t.requires_grad(x)) t.grad(x).noalias() += d_pre.transpose() * t.value(w);
      });
}

template <typename Scalar>
struct BiLstmOutput {
  Var<Scalar> states;    ///< T x 2H, row t = [forward_t ; backward_t]
  Var<Scalar> final_fw;  ///< 1 x H, forward state after the last frame
  Var<Scalar> final_bw;  ///< 1 x H, backward state after the first frame
};

/// Dropout settings applied to LSTM output states.
struct DropoutSpec {
  double rate = 0.0;
  bool train = false;
  Rng* rng = nullptr;
};

template <typename Scalar>
BiLstmOutput<Scalar> bilstm_forward(Var<Scalar> seq, const LstmParams<Scalar>& params,
                                    const DropoutSpec& drop = {}) {
  if (seq.rows() == 0) throw ShapeError("bilstm: empty sequence");
  Tape<Scalar>& t = *seq.tape;
  auto dir = [&](const LstmDirection<Scalar>& d, bool reverse) {
    return lstm_sequence(seq, t.parameter(*d.w), t.parameter(*d.u), t.parameter(*d.b), reverse);
  };
  Var<Scalar> fw = dir(params.fw, false);
  Var<Scalar> bw = dir(params.bw, true);
  Var<Scalar> states = concat({fw, bw});
  if (drop.train && drop.rate > 0.0) {
    if (!drop.rng) throw ShapeError("bilstm: train-mode dropout needs an rng");
    states = dropout(states, drop.rate, true, *drop.rng);
  }
  const Eigen::Index steps = seq.rows();
  const Eigen::Index H = params.hidden();
  return {states, block(states, steps - 1, 0, 1, H), block(states, 0, H, 1, H)};
}

}  // namespace excl
