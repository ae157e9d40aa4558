#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "elc/nn/tape.hpp"
#include "elc/nn/tensor.hpp"

// Learn-prune-share partitioning of a shared parameter set across tasks.
namespace elc::lps {

using nn::Mask;
using nn::Matrix;
using nn::ParamList;
using nn::ParamValues;

// One mask per parameter tensor, aligned with the network's parameter order.
using MaskSet = std::vector<Mask>;

struct TaskPartition {
  std::size_t task_id = 0;
  MaskSet owned;     // weights this task trained and keeps
  MaskSet adaptive;  // frozen earlier-task weights this task reuses
  double alpha = 0.0;
  double beta = 0.0;
};

struct AdmmConfig {
  double rho = 1e-2;
  double tau_admm = 1e-2;
  std::size_t update_interval = 5;  // epochs between projections
};

struct AdmmState {
  ParamValues Z;  // sparse target for the free weights
  ParamValues U;
  ParamValues Y;  // sparse target for the adaptive mask
  ParamValues K;
  MaskSet z_support;
  MaskSet y_support;
  double rho = 1e-2;
  double tau_admm = 1e-2;
  std::size_t update_interval = 5;
};

struct LifelongState {
  MaskSet cumulative;  // union of all owned supports
  double alpha_bar = 0.0;
  std::vector<TaskPartition> archive;
  std::vector<ParamList> heads;  // per task, never shared

  std::size_t task_count() const { return archive.size(); }
};

struct TaskContext {
  std::size_t task_id = 0;
  double alpha = 0.0;
  double beta = 0.0;
  MaskSet free;   // trainable by this task
  MaskSet prior;  // owned by earlier tasks
  std::vector<std::size_t> keep_counts;  // owned entries per tensor at finalize
  // Real-valued reuse mask over prior entries, clamped to [0, 1] in use.
  ParamList adaptive;
  AdmmState admm;
};

// --- pruning ----------------------------------------------------------------

std::size_t count_set(const Mask& m);
std::size_t count_set(const MaskSet& m);

// Top ceil(keep_fraction * eligible) entries by magnitude among eligible ones;
// ties go to the lower flat index. An empty eligible mask means every entry.
Mask hard_prune(std::span<const double> values, double keep_fraction, const Mask& eligible = {});

// Same with an explicit count, capped at the eligible count.
Mask hard_prune_count(std::span<const double> values, std::size_t keep, const Mask& eligible = {});

// Entries a task owning `alpha` of a tensor keeps, given the fraction and
// count already owned by earlier tasks. Cumulative rounding keeps every task
// within one element of alpha * size and lets capacities summing to 1 own the
// whole tensor.
std::size_t owned_count(double alpha_before, double alpha, std::size_t tensor_size,
                        std::size_t already_owned);

// --- task lifecycle -----------------------------------------------------------

LifelongState make_state(const ParamList& params);

// Re-draws values of free entries; called once per parameter tensor.
using InitSampler = std::function<Matrix(std::size_t param)>;

// Freezes earlier-task weights, re-initialises the rest and seeds the ADMM
// targets. Throws ConfigError when the capacity is exhausted.
TaskContext begin_task(LifelongState& state, ParamList& params, double alpha, double beta,
                       const AdmmConfig& admm, const InitSampler& init, std::uint64_t seed);

// (rho/2)||theta*free - Z + U||^2 + (tau/2)||A*prior - Y + K||^2
double admm_loss(const ParamValues& theta, const ParamValues& adaptive, const TaskContext& ctx);
nn::Var admm_loss(nn::Tape& tape, std::span<const nn::Var> theta, std::span<const nn::Var> adaptive,
                  const TaskContext& ctx);

// Z <- prune(theta + U), U <- U + theta - Z, and the mask analogue.
void admm_project(TaskContext& ctx, const ParamValues& theta, const ParamValues& adaptive);

// ||theta*free - Z|| summed over all tensors.
double admm_residual(const TaskContext& ctx, const ParamValues& theta);

// Effective weights while training the current task:
// theta*free + theta*prior*clamp(A, 0, 1).
std::vector<nn::Var> training_params(nn::Tape& tape, std::span<const nn::Var> theta,
                                     std::span<const nn::Var> adaptive, const TaskContext& ctx);
ParamValues training_values(const ParamList& params, const TaskContext& ctx);

// Called after the masks are fixed, with only the owned entries unfrozen.
using FineTune = std::function<void(const TaskPartition&)>;

TaskPartition finalize_task(LifelongState& state, TaskContext& ctx, ParamList& params,
                            const FineTune& fine_tune = {});

// theta * (owned_t + adaptive_t). Throws std::out_of_range for unknown tasks.
ParamValues compose_inference_params(const LifelongState& state, const ParamList& params,
                                     std::size_t task_id);
ParamValues compose_inference_params(const TaskPartition& part, const ParamList& params);

// Owned-mask discipline: pairwise disjoint owned supports, per-tensor owned
// counts within one element of alpha, adaptive support inside earlier owned
// supports. Returns an empty string when all hold.
std::string check_partitions(const LifelongState& state);

}  // namespace elc::lps
