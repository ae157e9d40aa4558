#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "elc/nn/tape.hpp"
#include "elc/nn/tensor.hpp"

namespace elc::nn {

// Builds a scalar loss on `tape` from the bound inputs.
using LossBuilder = std::function<Var(Tape& tape, std::span<const Var> inputs)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
};

struct GradCheckOptions {
  double step = 1e-4;
  // Relative error is |a - n| / max(|a|, |n|, denominator_floor).
  double denominator_floor = 1e-6;
  // 0 checks every entry; otherwise a seeded random subset of this size per input.
  std::size_t max_entries_per_input = 0;
  std::uint64_t seed = 0;
};

// Compares the tape gradient against central finite differences.
GradCheckResult check_gradients(const LossBuilder& build, const ParamValues& inputs,
                                const GradCheckOptions& opts = {});

}  // namespace elc::nn
