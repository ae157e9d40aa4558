#pragma once

#include <functional>
#include <string>
#include <vector>

#include "elc/config.hpp"
#include "elc/dataio.hpp"
#include "elc/model.hpp"

namespace elc {

struct EpochLog {
  std::size_t task = 0;
  std::string phase;  // warmup, admm, finetune or single
  std::size_t epoch = 0;  // within the phase
  double learning_rate = 0.0;
  double lambda_kl = 0.0;
  double task_loss = 0.0;   // batch mean
  double admm_loss = 0.0;   // batch mean, 0 outside the ADMM phase
  double admm_residual = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
};

// Called after each task is finalised with the model as it stands.
using TaskHook = std::function<void(const Model& model, std::size_t task)>;
using LogHook = std::function<void(const EpochLog& entry)>;

// Lifelong variants visit the tasks in order; single-phase variants train
// once on the union. Throws ConfigError or DataError on inconsistent inputs
// and NumericError when a loss stops being finite.
TrainResult run_training(const ExperimentConfig& cfg, const io::FrameDataset& train, const TaskHook& on_task = {},
                         const LogHook& on_epoch = {});

// KL annealing for the evidential loss over a task's ADMM + fine-tune epochs.
double kl_lambda_for_epoch(const ExperimentConfig& cfg, std::size_t epoch_in_task);

void write_epoch_log(const std::filesystem::path& path, const std::vector<EpochLog>& log);

}  // namespace elc
