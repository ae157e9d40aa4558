#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "elc/config.hpp"
#include "elc/lps.hpp"
#include "elc/nn/network.hpp"

namespace elc {

// A trained classifier: shared backbone, per-task partitions and heads.
// Single-training-phase variants hold exactly one partition that owns every
// parameter and one head over the union of classes.
struct Model {
  Variant variant = Variant::kElc;
  nn::Network net;
  lps::LifelongState state;               // state.heads[t] is head t
  std::vector<std::vector<int>> head_classes;  // global labels, by local index
  std::vector<std::string> task_names;
  double nu = 0.9;
  std::size_t mc_samples_eval = 20;
  std::uint64_t eval_seed = 0;
  UncertaintyKind uncertainty = UncertaintyKind::kEpistemic;
  std::string config_json;

  HeadKind kind() const { return head_kind(variant); }
  std::size_t head_count() const { return state.heads.size(); }
  // Head that scores frames of dataset task `task`.
  std::size_t head_for_task(int task) const;
};

}  // namespace elc
