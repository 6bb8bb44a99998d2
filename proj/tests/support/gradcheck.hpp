// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "oadt/ops.hpp"
#include "oadt/random.hpp"
#include "oadt/tensor.hpp"

namespace oadt::testing {

struct GradCheckReport {
  double max_error = 0.0;
  std::string worst;  // "input k, element i: analytic a vs numeric n"
  std::size_t checked = 0;
};

using GradFn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

// Central finite differences of <f(inputs), R> for a fixed random R,
// compared element-wise with the tape gradient. The error of one element is
// |a - n| / max(1, |n|). Inputs are perturbed in place, so tensors that
// share storage with model parameters check those parameters.
inline GradCheckReport gradcheck(const GradFn& f, std::vector<Tensor<double>> inputs,
                                 double step = 1e-5, std::uint64_t seed = 1234) {
  for (auto& x : inputs) x.set_requires_grad(true);
  const Tensor<double> probe = f(inputs);
  Rng rng(seed);
  const Tensor<double> weights = Tensor<double>::uniform(probe.shape(), -1.0, 1.0, rng);

  auto objective = [&]() {
    const Tensor<double> out = f(inputs);
    double s = 0.0;
    for (std::size_t i = 0; i < out.numel(); ++i) s += out[i] * weights[i];
    return s;
  };

  for (auto& x : inputs) x.zero_grad();
  Tape<double> tape;
  {
    TapeScope<double> scope(tape);
    const Tensor<double> out = f(inputs);
    tape.backward(ops::sum(ops::mul(out, weights)));
  }

  GradCheckReport report;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor<double> x = inputs[k];
    const std::vector<double> analytic(x.grad().begin(), x.grad().end());
    auto values = x.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + step;
      const double up = objective();
      values[i] = original - step;
      const double down = objective();
      values[i] = original;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic.empty() ? 0.0 : analytic[i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(numeric));
      ++report.checked;
      if (err > report.max_error) {
        report.max_error = err;
        report.worst = "input " + std::to_string(k) + ", element " + std::to_string(i) +
                       ": analytic " + std::to_string(a) + " vs numeric " +
                       std::to_string(numeric);
      }
    }
  }
  return report;
}

}  // namespace oadt::testing
