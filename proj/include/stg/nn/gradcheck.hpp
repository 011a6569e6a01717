#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "stg/nn/params.hpp"
#include "stg/nn/tape.hpp"

namespace stg::nn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// Builds the scalar loss on a fresh tape from the current parameter values.
using LossFn = std::function<Var(Tape<double>&, ParamStore<double>&)>;

/// Relative error |a - n| / max(|a|, |n|, floor); the floor keeps
/// near-zero gradients from dominating the report.
inline double relative_error(double a, double n, double floor = 1e-3) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

/// Compares tape gradients against central differences for every parameter
/// entry. Parameter values are restored on return.
inline GradCheckReport gradient_check(const LossFn& loss_fn, ParamStore<double>& params, double step = 1e-5) {
  params.zero_grad();
  {
    Tape<double> tape(false);
    Var loss = loss_fn(tape, params);
    tape.backward(loss);
  }
  auto eval = [&]() {
    Tape<double> tape(false);
    return tape.value(loss_fn(tape, params)).data[0];
  };
  GradCheckReport report;
  for (auto& [name, p] : params.entries()) {
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double orig = p.value.data[k];
      p.value.data[k] = orig + step;
      const double up = eval();
      p.value.data[k] = orig - step;
      const double down = eval();
      p.value.data[k] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = p.grad.data[k];
      const double err = relative_error(analytic, numeric);
      ++report.checked;
      if (err > report.max_rel_error || report.worst_param.empty()) {
        report.max_rel_error = err;
        report.worst_param = name;
        report.worst_index = k;
        report.analytic = analytic;
        report.numeric = numeric;
      }
    }
  }
  params.zero_grad();
  return report;
}

}  // namespace stg::nn
