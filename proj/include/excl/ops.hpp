#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "excl/autodiff.hpp"
#include "excl/rng.hpp"

namespace excl {

// ---------------------------------------------------------------------------
// Plain (non-differentiable) kernels shared by the tape ops and the decoders.
// ---------------------------------------------------------------------------

/// Softmax restricted to mask-true entries; masked-false entries are exactly 0.
template <typename Derived>
Vector<typename Derived::Scalar> masked_softmax(const Eigen::MatrixBase<Derived>& logits,
                                                const FrameMask& mask) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = logits.size();
  if (mask.size() != n)
    throw ShapeError("masked_softmax: logits " + std::to_string(n) + " vs mask " +
                     std::to_string(mask.size()));
  Scalar mx = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index i = 0; i < n; ++i)
    if (mask(i)) mx = std::max(mx, logits(i));
  if (!std::isfinite(mx)) {
    if (!mask.any()) throw ShapeError("masked_softmax: empty support");
    throw NumericError("masked_softmax: non-finite logits");
  }
  Vector<Scalar> out = Vector<Scalar>::Zero(n);
  Scalar z = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!mask(i)) continue;
    out(i) = std::exp(logits(i) - mx);
    z += out(i);
  }
  return out / z;
}

/// log of masked_softmax on the support; masked-false entries are -inf.
template <typename Derived>
Vector<typename Derived::Scalar> masked_log_softmax(const Eigen::MatrixBase<Derived>& logits,
                                                    const FrameMask& mask) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = logits.size();
  if (mask.size() != n) throw ShapeError("masked_log_softmax: logits/mask length mismatch");
  if (!mask.any()) throw ShapeError("masked_log_softmax: empty support");
  Scalar mx = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index i = 0; i < n; ++i)
    if (mask(i)) mx = std::max(mx, logits(i));
  Scalar z = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (mask(i)) z += std::exp(logits(i) - mx);
  const Scalar lse = mx + std::log(z);
  Vector<Scalar> out(n);
  for (Eigen::Index i = 0; i < n; ++i)
    out(i) = mask(i) ? logits(i) - lse : -std::numeric_limits<Scalar>::infinity();
  return out;
}

/// Inverted dropout on a plain array: eval is the identity, train zeroes each
/// entry with probability p and scales survivors by 1/(1-p).
template <typename Scalar>
Matrix<Scalar> dropout(const Matrix<Scalar>& x, double p, bool train, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ShapeError("dropout: rate must be in [0,1), got " + std::to_string(p));
  if (!train || p == 0.0) return x;
  const Scalar keep = Scalar(1.0 / (1.0 - p));
  Matrix<Scalar> out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      out(i, j) = rng.uniform() < p ? Scalar(0) : x(i, j) * keep;
  return out;
}

// ---------------------------------------------------------------------------
// Differentiable ops. Sequences are laid out with one frame per row.
// ---------------------------------------------------------------------------

namespace detail {
inline void require(bool ok, const char* op, const Shape& a, const Shape& b) {
  if (!ok) throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
}
}  // namespace detail

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  detail::require(a.cols() == b.rows(), "matmul", a.shape(), b.shape());
  Tape<Scalar>& t = *a.tape;
  Matrix<Scalar> y = a.value() * b.value();
  return t.push("matmul", std::move(y), t.requires_grad(a) || t.requires_grad(b),
                [a, b](Tape<Scalar>& t, Var<Scalar> self) {
                  const auto& g = t.grad(self);
                  if (t.requires_grad(a)) t.accumulate(a, g * t.value(b).transpose());
                  if (t.requires_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
                });
}

/// Row-wise affine map: y = x W^T + 1 b^T with W (out x in), b (out x 1).
template <typename Scalar>
Var<Scalar> affine(Var<Scalar> x, Var<Scalar> w, Var<Scalar> b) {
  detail::require(x.cols() == w.cols(), "affine(x, W)", x.shape(), w.shape());
  detail::require(b.rows() == w.rows() && b.cols() == 1, "affine(W, b)", w.shape(), b.shape());
  Tape<Scalar>& t = *x.tape;
  Matrix<Scalar> y = x.value() * w.value().transpose();
  y.rowwise() += b.value().col(0).transpose();
  const bool rg = t.requires_grad(x) || t.requires_grad(w) || t.requires_grad(b);
  return t.push("affine", std::move(y), rg, [x, w, b](Tape<Scalar>& t, Var<Scalar> self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(x)) t.accumulate(x, g * t.value(w));
    if (t.requires_grad(w)) t.accumulate(w, g.transpose() * t.value(x));
    if (t.requires_grad(b)) t.accumulate(b, g.colwise().sum().transpose());
  });
}

/// Concatenation along the last axis (columns).
template <typename Scalar>
Var<Scalar> concat(std::span<const Var<Scalar>> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Tape<Scalar>& t = *parts[0].tape;
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  bool rg = false;
  for (const auto& p : parts) {
    detail::require(p.rows() == rows, "concat", parts[0].shape(), p.shape());
    cols += p.cols();
    rg = rg || t.requires_grad(p);
  }
  Matrix<Scalar> y(rows, cols);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    y.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  std::vector<Var<Scalar>> inputs(parts.begin(), parts.end());
  return t.push("concat", std::move(y), rg, [inputs](Tape<Scalar>& t, Var<Scalar> self) {
    const auto& g = t.grad(self);
    Eigen::Index off = 0;
    for (const auto& p : inputs) {
      const Eigen::Index c = t.value(p).cols();
      if (t.requires_grad(p)) t.accumulate(p, g.middleCols(off, c));
      off += c;
    }
  });
}

template <typename Scalar>
Var<Scalar> concat(std::initializer_list<Var<Scalar>> parts) {
  std::vector<Var<Scalar>> v(parts);
  return concat(std::span<const Var<Scalar>>(v));
}

/// Broadcast a 1xN row to T rows.
template <typename Scalar>
Var<Scalar> repeat_rows(Var<Scalar> row, Eigen::Index times) {
  if (row.rows() != 1) throw ShapeError("repeat_rows: expected a single row, got " + to_string(row.shape()));
  Tape<Scalar>& t = *row.tape;
  Matrix<Scalar> y = row.value().replicate(times, 1);
  return t.push("repeat_rows", std::move(y), t.requires_grad(row),
                [row](Tape<Scalar>& t, Var<Scalar> self) {
                  t.accumulate(row, t.grad(self).colwise().sum());
                });
}

/// Contiguous sub-block.
template <typename Scalar>
Var<Scalar> block(Var<Scalar> x, Eigen::Index r0, Eigen::Index c0, Eigen::Index nr, Eigen::Index nc) {
  if (r0 < 0 || c0 < 0 || nr < 0 || nc < 0 || r0 + nr > x.rows() || c0 + nc > x.cols())
    throw ShapeError("block: [" + std::to_string(r0) + "+" + std::to_string(nr) + ", " +
                     std::to_string(c0) + "+" + std::to_string(nc) + "] out of " + to_string(x.shape()));
  Tape<Scalar>& t = *x.tape;
  Matrix<Scalar> y = x.value().block(r0, c0, nr, nc);
  return t.push("block", std::move(y), t.requires_grad(x),
                [x, r0, c0, nr, nc](Tape<Scalar>& t, Var<Scalar> self) {
                  t.grad(x).block(r0, c0, nr, nc) += t.grad(self);
                });
}

template <typename Scalar>
Var<Scalar> pick(Var<Scalar> x, Eigen::Index r, Eigen::Index c = 0) {
  return block(x, r, c, 1, 1);
}

template <typename Scalar>
Var<Scalar> tanh(Var<Scalar> x) {
  Tape<Scalar>& t = *x.tape;
  Matrix<Scalar> y = x.value().array().tanh().matrix();
  return t.push("tanh", std::move(y), t.requires_grad(x), [x](Tape<Scalar>& t, Var<Scalar> self) {
    const auto& y = t.value(self);
    t.accumulate(x, (t.grad(self).array() * (Scalar(1) - y.array().square())).matrix());
  });
}

template <typename Scalar>
Var<Scalar> sigmoid(Var<Scalar> x) {
  Tape<Scalar>& t = *x.tape;
  Matrix<Scalar> y = (Scalar(1) / (Scalar(1) + (-x.value().array()).exp())).matrix();
  return t.push("sigmoid", std::move(y), t.requires_grad(x), [x](Tape<Scalar>& t, Var<Scalar> self) {
    const auto& y = t.value(self);
    t.accumulate(x, (t.grad(self).array() * y.array() * (Scalar(1) - y.array())).matrix());
  });
}

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  detail::require(a.shape() == b.shape(), "add", a.shape(), b.shape());
  Tape<Scalar>& t = *a.tape;
  Matrix<Scalar> y = a.value() + b.value();
  return t.push("add", std::move(y), t.requires_grad(a) || t.requires_grad(b),
                [a, b](Tape<Scalar>& t, Var<Scalar> self) {
                  t.accumulate(a, t.grad(self));
                  t.accumulate(b, t.grad(self));
                });
}

template <typename Scalar>
Var<Scalar> sub(Var<Scalar> a, Var<Scalar> b) {
  detail::require(a.shape() == b.shape(), "sub", a.shape(), b.shape());
  Tape<Scalar>& t = *a.tape;
  Matrix<Scalar> y = a.value() - b.value();
  return t.push("sub", std::move(y), t.requires_grad(a) || t.requires_grad(b),
                [a, b](Tape<Scalar>& t, Var<Scalar> self) {
                  t.accumulate(a, t.grad(self));
                  t.accumulate(b, -t.grad(self));
                });
}

/// Pointwise product.
template <typename Scalar>
Var<Scalar> mul(Var<Scalar> a, Var<Scalar> b) {
  detail::require(a.shape() == b.shape(), "mul", a.shape(), b.shape());
  Tape<Scalar>& t = *a.tape;
  Matrix<Scalar> y = a.value().cwiseProduct(b.value());
  return t.push("mul", std::move(y), t.requires_grad(a) || t.requires_grad(b),
                [a, b](Tape<Scalar>& t, Var<Scalar> self) {
                  const auto& g = t.grad(self);
                  if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
                  if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
                });
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> x, Scalar c) {
  Tape<Scalar>& t = *x.tape;
  Matrix<Scalar> y = x.value() * c;
  return t.push("scale", std::move(y), t.requires_grad(x), [x, c](Tape<Scalar>& t, Var<Scalar> self) {
    t.accumulate(x, t.grad(self) * c);
  });
}

template <typename Scalar>
Var<Scalar> log(Var<Scalar> x) {
  Tape<Scalar>& t = *x.tape;
  Matrix<Scalar> y = x.value().array().log().matrix();
  return t.push("log", std::move(y), t.requires_grad(x), [x](Tape<Scalar>& t, Var<Scalar> self) {
    t.accumulate(x, t.grad(self).cwiseQuotient(t.value(x)));
  });
}

template <typename Scalar>
Var<Scalar> sum(Var<Scalar> x) {
  Tape<Scalar>& t = *x.tape;
  Matrix<Scalar> y(1, 1);
  y(0, 0) = x.value().sum();
  return t.push("sum", std::move(y), t.requires_grad(x), [x](Tape<Scalar>& t, Var<Scalar> self) {
    const Scalar g = t.grad(self)(0, 0);
    t.grad(x).array() += g;
  });
}

template <typename Scalar>
Var<Scalar> mean(Var<Scalar> x) {
  if (x.value().size() == 0) throw ShapeError("mean: empty input");
  return scale(sum(x), Scalar(1) / static_cast<Scalar>(x.value().size()));
}

/// sum(a .* b) as a 1x1 node.
template <typename Scalar>
Var<Scalar> dot(Var<Scalar> a, Var<Scalar> b) {
  return sum(mul(a, b));
}

/// Pointwise |a - b|; the subgradient at 0 is 0.
template <typename Scalar>
Var<Scalar> abs_diff(Var<Scalar> a, Var<Scalar> b) {
  detail::require(a.shape() == b.shape(), "abs_diff", a.shape(), b.shape());
  Tape<Scalar>& t = *a.tape;
  Matrix<Scalar> d = a.value() - b.value();
  Matrix<Scalar> y = d.cwiseAbs();
  return t.push("abs_diff", std::move(y), t.requires_grad(a) || t.requires_grad(b),
                [a, b, d = std::move(d)](Tape<Scalar>& t, Var<Scalar> self) {
                  Matrix<Scalar> s = d.unaryExpr([](Scalar v) {
                    return v > 0 ? Scalar(1) : (v < 0 ? Scalar(-1) : Scalar(0));
                  });
                  Matrix<Scalar> g = t.grad(self).cwiseProduct(s);
                  t.accumulate(a, g);
                  t.accumulate(b, -g);
                });
}

/// Pointwise (a - b)^2.
template <typename Scalar>
Var<Scalar> sq_diff(Var<Scalar> a, Var<Scalar> b) {
  detail::require(a.shape() == b.shape(), "sq_diff", a.shape(), b.shape());
  Tape<Scalar>& t = *a.tape;
  Matrix<Scalar> d = a.value() - b.value();
  Matrix<Scalar> y = d.array().square().matrix();
  return t.push("sq_diff", std::move(y), t.requires_grad(a) || t.requires_grad(b),
                [a, b, d = std::move(d)](Tape<Scalar>& t, Var<Scalar> self) {
                  Matrix<Scalar> g = Scalar(2) * t.grad(self).cwiseProduct(d);
                  t.accumulate(a, g);
                  t.accumulate(b, -g);
                });
}

/// Softmax of a Tx1 column over mask-true entries.
template <typename Scalar>
Var<Scalar> masked_softmax(Var<Scalar> logits, const FrameMask& mask) {
  if (logits.cols() != 1) throw ShapeError("masked_softmax: expected a column, got " + to_string(logits.shape()));
  Tape<Scalar>& t = *logits.tape;
  Matrix<Scalar> p = masked_softmax(logits.value().col(0), mask);
  return t.push("masked_softmax", std::move(p), t.requires_grad(logits),
                [logits](Tape<Scalar>& t, Var<Scalar> self) {
                  const auto& p = t.value(self);
                  const auto& g = t.grad(self);
                  const Scalar inner = p.cwiseProduct(g).sum();
                  t.accumulate(logits, p.cwiseProduct((g.array() - inner).matrix()));
                });
}

/// Log-softmax of a Tx1 column; masked-false entries carry a large negative
/// placeholder instead of -inf so the tape stays finite. Only pick supported
/// entries.
template <typename Scalar>
Var<Scalar> masked_log_softmax(Var<Scalar> logits, const FrameMask& mask) {
  if (logits.cols() != 1) throw ShapeError("masked_log_softmax: expected a column, got " + to_string(logits.shape()));
  Tape<Scalar>& t = *logits.tape;
  Vector<Scalar> ls = masked_log_softmax(logits.value().col(0), mask);
  for (Eigen::Index i = 0; i < ls.size(); ++i)
    if (!mask(i)) ls(i) = -std::numeric_limits<Scalar>::max();
  return t.push("masked_log_softmax", Matrix<Scalar>(ls), t.requires_grad(logits),
                [logits, mask](Tape<Scalar>& t, Var<Scalar> self) {
                  const auto& ls = t.value(self);
                  Matrix<Scalar> g = t.grad(self);
                  Scalar total = 0;
                  for (Eigen::Index i = 0; i < g.rows(); ++i) {
                    if (!mask(i)) g(i, 0) = 0;
                    total += g(i, 0);
                  }
                  Matrix<Scalar> dx = Matrix<Scalar>::Zero(g.rows(), 1);
                  for (Eigen::Index i = 0; i < g.rows(); ++i)
                    if (mask(i)) dx(i, 0) = g(i, 0) - std::exp(ls(i, 0)) * total;
                  t.accumulate(logits, dx);
                });
}

/// Rows of a parameter table selected by index (embedding lookup).
template <typename Scalar>
Var<Scalar> gather_rows(Var<Scalar> table, std::span<const int> ids) {
  Tape<Scalar>& t = *table.tape;
  const auto& tv = table.value();
  Matrix<Scalar> y(static_cast<Eigen::Index>(ids.size()), tv.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= tv.rows())
      throw ShapeError("gather_rows: index " + std::to_string(ids[i]) + " outside table " + to_string(table.shape()));
    y.row(static_cast<Eigen::Index>(i)) = tv.row(ids[i]);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return t.push("gather_rows", std::move(y), t.requires_grad(table),
                [table, idx = std::move(idx)](Tape<Scalar>& t, Var<Scalar> self) {
                  const auto& g = t.grad(self);
                  auto& tg = t.grad(table);
                  for (std::size_t i = 0; i < idx.size(); ++i) tg.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
                });
}

/// Inverted dropout as a tape op; the sampled keep-mask is reused in backward.
template <typename Scalar>
Var<Scalar> dropout(Var<Scalar> x, double p, bool train, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ShapeError("dropout: rate must be in [0,1), got " + std::to_string(p));
  if (!train || p == 0.0) return x;
  Tape<Scalar>& t = *x.tape;
  const auto& xv = x.value();
  const Scalar keep = Scalar(1.0 / (1.0 - p));
  Matrix<Scalar> m(xv.rows(), xv.cols());
  for (Eigen::Index j = 0; j < xv.cols(); ++j)
    for (Eigen::Index i = 0; i < xv.rows(); ++i) m(i, j) = rng.uniform() < p ? Scalar(0) : keep;
  Matrix<Scalar> y = xv.cwiseProduct(m);
  return t.push("dropout", std::move(y), t.requires_grad(x),
                [x, m = std::move(m)](Tape<Scalar>& t, Var<Scalar> self) {
                  t.accumulate(x, t.grad(self).cwiseProduct(m));
                });
}

}  // namespace excl
