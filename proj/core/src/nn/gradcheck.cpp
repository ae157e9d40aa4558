#include "elc/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "elc/rng.hpp"

namespace elc::nn {

namespace {

double evaluate(const LossBuilder& build, const ParamValues& inputs) {
  Tape tape;
  std::vector<Var> bound;
  bound.reserve(inputs.size());
  for (const auto& m : inputs) bound.push_back(tape.constant(m));
  return build(tape, bound).scalar();
}

}  // namespace

GradCheckResult check_gradients(const LossBuilder& build, const ParamValues& inputs,
                                const GradCheckOptions& opts) {
  ParamValues analytic;
  {
    Tape tape;
    std::vector<Var> bound;
    for (const auto& m : inputs) bound.push_back(tape.variable(m));
    Var loss = build(tape, bound);
    tape.backward(loss);
    for (const auto& v : bound) analytic.push_back(tape.gradient(v));
  }

  GradCheckResult res;
  ParamValues probe = inputs;
  Rng rng = make_rng(opts.seed, {0x6763});
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::vector<Eigen::Index> entries(static_cast<std::size_t>(inputs[i].size()));
    std::iota(entries.begin(), entries.end(), Eigen::Index{0});
    if (opts.max_entries_per_input > 0 && entries.size() > opts.max_entries_per_input) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(opts.max_entries_per_input);
    }
    for (Eigen::Index k : entries) {
      double& x = probe[i].data()[k];
      const double x0 = x;
      x = x0 + opts.step;
      const double up = evaluate(build, probe);
      x = x0 - opts.step;
      const double down = evaluate(build, probe);
      x = x0;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double a = analytic[i].data()[k];
      const double abs_err = std::abs(a - numeric);
      const double denom = std::max({std::abs(a), std::abs(numeric), opts.denominator_floor});
      res.max_abs_error = std::max(res.max_abs_error, abs_err);
      res.max_relative_error = std::max(res.max_relative_error, abs_err / denom);
      ++res.checked;
    }
  }
  return res;
}

}  // namespace elc::nn
