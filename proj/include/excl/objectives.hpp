#pragma once

#include <span>
#include <string>
#include <vector>

#include "excl/ops.hpp"
#include "excl/predictors.hpp"

namespace excl {

/// Ground truth span in seconds and frame indices.
struct SpanTarget {
  double start_sec = 0.0;
  double end_sec = 0.0;
  int start_idx = 0;
  int end_idx = 0;
};

/// Start/end times predicted by the expectation head.
struct RegPrediction {
  double t_s = 0.0;
  double t_e = 0.0;
};

enum class RegLossKind { abs, mse };

/// Row s is the end distribution given start s: softmax of S_end over
/// {e : mask(e) and e >= s}. Rows of masked-out starts are all zero.
template <typename Derived>
Matrix<typename Derived::Scalar> cond_end_distribution(const Eigen::MatrixBase<Derived>& s_end,
                                                       const FrameMask& mask) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = s_end.size();
  if (mask.size() != n) throw ShapeError("cond_end_distribution: logits/mask length mismatch");
  if (!mask.any()) throw ShapeError("cond_end_distribution: empty support");
  Matrix<Scalar> out = Matrix<Scalar>::Zero(n, n);
  // suffix maxima over valid frames keep every row's exponentials <= 1
  Vector<Scalar> suffix_max(n);
  Scalar running = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index e = n - 1; e >= 0; --e) {
    if (mask(e)) running = std::max(running, s_end(e));
    suffix_max(e) = running;
  }
  for (Eigen::Index s = 0; s < n; ++s) {
    if (!mask(s)) continue;
    Scalar z = 0;
    for (Eigen::Index e = s; e < n; ++e) {
      if (!mask(e)) continue;
      out(s, e) = std::exp(s_end(e) - suffix_max(s));
      z += out(s, e);
    }
    out.row(s) /= z;
  }
  return out;
}

/// t_s = sum_s P_start(s) start_time(s);
/// t_e = sum_s P_start(s) sum_e P_end|start(e|s) end_time(e).
/// Since end_time >= start_time entrywise and both are nondecreasing, t_e >= t_s.
template <typename D1, typename D2, typename D3, typename D4>
RegPrediction expected_times(const Eigen::MatrixBase<D1>& s_start, const Eigen::MatrixBase<D2>& s_end,
                             const Eigen::MatrixBase<D3>& start_times, const Eigen::MatrixBase<D4>& end_times,
                             const FrameMask& mask) {
  using Scalar = typename D1::Scalar;
  const Eigen::Index n = s_start.size();
  if (s_end.size() != n || start_times.size() != n || end_times.size() != n)
    throw ShapeError("expected_times: length mismatch");
  const Vector<Scalar> p_start = masked_softmax(s_start, mask);
  const Matrix<Scalar> cond = cond_end_distribution(s_end, mask);
  const Vector<Scalar> inner = cond * end_times.derived().template cast<Scalar>();
  RegPrediction r;
  r.t_s = static_cast<double>(p_start.dot(start_times.derived().template cast<Scalar>()));
  r.t_e = static_cast<double>(p_start.dot(inner));
  return r;
}

/// Single time grid for both boundaries.
template <typename D1, typename D2, typename D3>
RegPrediction expected_times(const Eigen::MatrixBase<D1>& s_start, const Eigen::MatrixBase<D2>& s_end,
                             const Eigen::MatrixBase<D3>& frame_times, const FrameMask& mask) {
  return expected_times(s_start, s_end, frame_times, frame_times, mask);
}

/// Boundary times of each frame normalized by clip duration: frame t covers
/// [t/T, (t+1)/T). Multiply by T/fps to get seconds.
template <typename Scalar>
std::pair<Vector<Scalar>, Vector<Scalar>> normalized_frame_times(Eigen::Index frames) {
  Vector<Scalar> start(frames), end(frames);
  for (Eigen::Index t = 0; t < frames; ++t) {
    start(t) = static_cast<Scalar>(static_cast<double>(t) / static_cast<double>(frames));
    end(t) = static_cast<Scalar>(static_cast<double>(t + 1) / static_cast<double>(frames));
  }
  return {start, end};
}

// ---------------------------------------------------------------------------
// Tape versions.
// ---------------------------------------------------------------------------

template <typename Scalar>
Var<Scalar> cond_end_distribution(Var<Scalar> s_end, const FrameMask& mask) {
  if (s_end.cols() != 1) throw ShapeError("cond_end_distribution: expected a column, got " + to_string(s_end.shape()));
  Tape<Scalar>& t = *s_end.tape;
  Matrix<Scalar> p = cond_end_distribution(s_end.value().col(0), mask);
  return t.push("cond_end", std::move(p), t.requires_grad(s_end), [s_end](Tape<Scalar>& t, Var<Scalar> self) {
    const auto& p = t.value(self);
    const auto& g = t.grad(self);
    const Vector<Scalar> inner = p.cwiseProduct(g).rowwise().sum();
    Matrix<Scalar> d = p.cwiseProduct(g - inner.replicate(1, g.cols()));
    t.accumulate(s_end, d.colwise().sum().transpose());
  });
}

template <typename Scalar>
struct RegPredictionVar {
  Var<Scalar> t_s;  // 1x1
  Var<Scalar> t_e;  // 1x1
};

template <typename Scalar>
RegPredictionVar<Scalar> expected_times(const SpanScoresVar<Scalar>& scores, const Vector<Scalar>& start_times,
                                        const Vector<Scalar>& end_times, const FrameMask& mask) {
  Tape<Scalar>& t = *scores.start.tape;
  if (start_times.size() != scores.start.rows() || end_times.size() != scores.end.rows())
    throw ShapeError("expected_times: time grid length mismatch");
  Var<Scalar> p_start = masked_softmax(scores.start, mask);
  Var<Scalar> cond = cond_end_distribution(scores.end, mask);
  Var<Scalar> st = t.input(start_times);
  Var<Scalar> et = t.input(end_times);
  return {dot(p_start, st), dot(p_start, matmul(cond, et))};
}

/// -(1/N) sum_i [log P_start(t_s^i) + log P_end(t_e^i)], softmax over each
/// item's valid frames.
template <typename Scalar>
Var<Scalar> clf_nll_loss(std::span<const SpanScoresVar<Scalar>> scores, std::span<const SpanTarget> targets,
                         std::span<const FrameMask> masks) {
  if (scores.empty() || scores.size() != targets.size() || scores.size() != masks.size())
    throw ShapeError("clf_nll_loss: batch sizes disagree or batch is empty");
  std::vector<Var<Scalar>> terms;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& m = masks[i];
    const auto& tg = targets[i];
    auto valid = [&](int idx) { return idx >= 0 && idx < m.size() && m(idx); };
    if (!valid(tg.start_idx) || !valid(tg.end_idx))
      throw ShapeError("clf_nll_loss: target (" + std::to_string(tg.start_idx) + ", " + std::to_string(tg.end_idx) +
                       ") of item " + std::to_string(i) + " lies on a padded or missing frame");
    terms.push_back(pick(masked_log_softmax(scores[i].start, m), tg.start_idx));
    terms.push_back(pick(masked_log_softmax(scores[i].end, m), tg.end_idx));
  }
  Var<Scalar> total = sum(concat(std::span<const Var<Scalar>>(terms)));
  return scale(total, Scalar(-1) / static_cast<Scalar>(scores.size()));
}

/// Target span as fractions of the clip duration.
struct NormalizedSpan {
  double start = 0.0;
  double end = 0.0;
};

/// Batch mean of |dt_s| + |dt_e| (abs) or dt_s^2 + dt_e^2 (mse).
template <typename Scalar>
Var<Scalar> reg_loss(std::span<const RegPredictionVar<Scalar>> preds, std::span<const NormalizedSpan> targets,
                     RegLossKind kind = RegLossKind::abs) {
  if (preds.empty() || preds.size() != targets.size())
    throw ShapeError("reg_loss: batch sizes disagree or batch is empty");
  Tape<Scalar>& t = *preds[0].t_s.tape;
  std::vector<Var<Scalar>> terms;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& tg = targets[i];
    if (!(tg.start >= 0.0 && tg.start <= 1.0 && tg.end >= 0.0 && tg.end <= 1.0))
      throw DataError("reg_loss: target (" + std::to_string(tg.start) + ", " + std::to_string(tg.end) +
                      ") of item " + std::to_string(i) + " is outside [0,1]; annotation exceeds clip duration");
    Matrix<Scalar> gt(1, 2);
    gt << static_cast<Scalar>(tg.start), static_cast<Scalar>(tg.end);
    Var<Scalar> pred = concat({preds[i].t_s, preds[i].t_e});
    Var<Scalar> target = t.input(gt);
    terms.push_back(sum(kind == RegLossKind::abs ? abs_diff(pred, target) : sq_diff(pred, target)));
  }
  Var<Scalar> total = sum(concat(std::span<const Var<Scalar>>(terms)));
  return scale(total, Scalar(1) / static_cast<Scalar>(preds.size()));
}

}  // namespace excl
