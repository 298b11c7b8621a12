#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "excl/autodiff.hpp"

namespace excl {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates, one pair per parameter in store order.
template <typename Scalar>
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<Matrix<Scalar>> m;
  std::vector<Matrix<Scalar>> v;

  AdamState() = default;
  AdamState(const ParameterStore<Scalar>& params, AdamConfig cfg) : config(cfg) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      m.push_back(Matrix<Scalar>::Zero(params[i].value.rows(), params[i].value.cols()));
      v.push_back(Matrix<Scalar>::Zero(params[i].value.rows(), params[i].value.cols()));
    }
  }
};

/// One bias-corrected Adam update using the gradients stored on the params.
template <typename Scalar>
void adam_step(ParameterStore<Scalar>& params, AdamState<Scalar>& state) {
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw ShapeError("adam_step: state tracks " + std::to_string(state.m.size()) + " tensors, store has " +
                     std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (shape_of(p.grad) != shape_of(p.value) || shape_of(state.m[i]) != shape_of(p.value))
      throw ShapeError("adam_step: shape mismatch for " + p.name);
    if (!p.grad.allFinite()) throw NumericError("adam_step: non-finite gradient in " + p.name);
  }
  ++state.step;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const Scalar b1 = static_cast<Scalar>(c.beta1);
  const Scalar b2 = static_cast<Scalar>(c.beta2);
  const Scalar corr1 = static_cast<Scalar>(1.0 - std::pow(c.beta1, t));
  const Scalar corr2 = static_cast<Scalar>(1.0 - std::pow(c.beta2, t));
  const Scalar lr = static_cast<Scalar>(c.lr);
  const Scalar eps = static_cast<Scalar>(c.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    m = b1 * m + (Scalar(1) - b1) * p.grad;
    v = b2 * v + (Scalar(1) - b2) * p.grad.cwiseAbs2();
    p.value.array() -= lr * (m.array() / corr1) / ((v.array() / corr2).sqrt() + eps);
  }
}

}  // namespace excl
