#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "elc/config.hpp"
#include "elc/evaluation.hpp"
#include "elc/model.hpp"
#include "elc/selpred.hpp"

namespace elc::report {

namespace fs = std::filesystem;

struct SelectiveSummary {
  double coverage_target = 0.8;
  sel::ThresholdChoice threshold;
  std::size_t samples = 0;
  double base_recall = 0.0;
  std::optional<double> selective_recall;
  std::optional<double> auc;
  // Pooled over every bin at or below the low-SNR edge.
  std::size_t low_snr_samples = 0;
  std::optional<double> low_snr_base_recall;
  std::optional<double> low_snr_selective_recall;
  double low_snr_coverage = 0.0;
  std::optional<double> low_snr_auc;
};

// Writes risk_coverage.csv, snr_table.csv, roc.csv, roc_low_snr.csv (only
// when low-SNR samples exist) and selective_summary.json into `dir`.
// Throws ConfigError for a coverage target outside (0, 1].
SelectiveSummary run_selective_report(const fs::path& dir, std::span<const sel::ScoredPrediction> preds,
                                      const SelectiveConfig& cfg);

SelectiveSummary summarize(std::span<const sel::ScoredPrediction> preds, const SelectiveConfig& cfg);
void write_selective_summary(const fs::path& path, const SelectiveSummary& s);

// dataset,task,variant,task_recall,task_accuracy,task_avg
void write_recall_table(const fs::path& path, Variant variant, const Evaluation& ev);

struct RunInfo {
  std::string name;
  Variant variant = Variant::kElc;
  std::uint64_t seed = 0;
  std::string config_hash;
  double train_seconds = 0.0;
  double alpha_bar = 0.0;
  std::vector<std::size_t> owned_per_task;
  std::size_t backbone_params = 0;
};

void write_run_summary(const fs::path& path, const RunInfo& info, const Evaluation& ev, const SelectiveSummary& sel);

RunInfo describe(const Model& model, const ExperimentConfig& cfg, double train_seconds);

struct AggregateRow {
  std::string dataset;
  int task = 0;
  std::string variant;
  double recall_mean = 0.0;
  std::size_t runs = 0;
};

struct Aggregate {
  std::vector<std::string> variants;  // column order
  std::vector<AggregateRow> rows;
  std::size_t runs = 0;
};

// Collects every recall_table.csv under `root` (up to three levels deep) and
// writes table1.csv: one row per task plus a task-average row, one column per
// variant, recall in percent averaged over runs. Also writes
// selective_table.csv from the selective summaries found alongside.
// Throws DataError when no run is found.
Aggregate aggregate_runs(const fs::path& root);

}  // namespace elc::report
