#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "excl/autodiff.hpp"

namespace excl {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  Eigen::Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  Eigen::Index entries = 0;
};

/// Builds the loss on the supplied tape. Must be a pure function of the
/// parameter values (re-seed any dropout rng inside).
using LossBuilder = std::function<Var<double>(Tape<double>&)>;

/// Compares backward() against central differences over every entry of
/// every parameter. Relative error per entry is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
inline GradCheckResult grad_check(const LossBuilder& loss_fn, ParameterStore<double>& params,
                                  double eps = 1e-4) {
  auto evaluate = [&]() {
    Tape<double> tape(false);
    return loss_fn(tape).scalar();
  };

  params.zero_grad();
  double base = 0.0;
  {
    Tape<double> tape(true);
    Var<double> loss = loss_fn(tape);
    base = loss.scalar();
    tape.backward(loss);
  }
  if (evaluate() != base || evaluate() != base)
    throw NumericError("grad_check: loss is not deterministic; disable dropout or pin its seed");

  GradCheckResult res;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      double& slot = p.value.data()[i];
      const double saved = slot;
      slot = saved + eps;
      const double up = evaluate();
      slot = saved - eps;
      const double down = evaluate();
      slot = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p.grad.data()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      ++res.entries;
      if (rel > res.max_rel_error || res.worst_index < 0) {
        res.max_rel_error = std::max(rel, res.max_rel_error);
        res.worst_param = p.name;
        res.worst_index = i;
        res.analytic = analytic;
        res.numeric = numeric;
      }
    }
  }
  return res;
}

}  // namespace excl
