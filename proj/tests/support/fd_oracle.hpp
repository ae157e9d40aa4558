#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "elc/nn/tape.hpp"
#include "elc/nn/tensor.hpp"

namespace elc::testing {

using LossFn = std::function<nn::Var(nn::Tape&, std::span<const nn::Var>)>;

struct FdReport {
  double max_rel = 0.0;
  std::size_t entries = 0;
};

// Fourth-order central differences on every entry of every input, compared
// against the tape's reverse sweep. Relative error uses max(|a|, |n|, floor).
inline FdReport finite_difference(const LossFn& loss, const nn::ParamValues& inputs, double step = 1e-4,
                                  double floor = 1e-6) {
  nn::ParamValues analytic;
  {
    nn::Tape tape;
    std::vector<nn::Var> vars;
    for (const auto& m : inputs) vars.push_back(tape.variable(m));
    tape.backward(loss(tape, vars));
    for (const auto& v : vars) analytic.push_back(tape.gradient(v));
  }
  auto eval = [&](const nn::ParamValues& at) {
    nn::Tape tape;
    std::vector<nn::Var> vars;
    for (const auto& m : at) vars.push_back(tape.constant(m));
    return loss(tape, vars).scalar();
  };
  FdReport rep;
  nn::ParamValues probe = inputs;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    for (Eigen::Index k = 0; k < probe[i].size(); ++k) {
      const double x0 = probe[i].data()[k];
      auto at = [&](double dx) {
        probe[i].data()[k] = x0 + dx;
        return eval(probe);
      };
      const double num = (8.0 * (at(step) - at(-step)) - (at(2.0 * step) - at(-2.0 * step))) / (12.0 * step);
      probe[i].data()[k] = x0;
      const double a = analytic[i].data()[k];
      const double rel = std::abs(a - num) / std::max({std::abs(a), std::abs(num), floor});
      rep.max_rel = std::max(rep.max_rel, rel);
      ++rep.entries;
    }
  }
  return rep;
}

}  // namespace elc::testing
