#pragma once

#include <filesystem>
#include <vector>

#include "elc/config.hpp"
#include "elc/datagen.hpp"
#include "elc/evaluation.hpp"
#include "elc/report.hpp"
#include "elc/training.hpp"

namespace elc {

struct ExperimentResult {
  TrainResult trained;
  Evaluation evaluation;
  report::SelectiveSummary selective;
  report::RunInfo info;
};

// Train on data.train, evaluate on data.test and, when `run_dir` is not
// empty, write the checkpoint, predictions, epoch log, recall table,
// selective report and run summary there.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const data::GeneratedData& data,
                                const std::filesystem::path& run_dir = {}, const LogHook& on_epoch = {});

// Evaluation artefacts shared by `train` and `eval`.
report::SelectiveSummary write_evaluation(const std::filesystem::path& dir, const Model& model,
                                          const Evaluation& ev, const SelectiveConfig& sel);

}  // namespace elc
