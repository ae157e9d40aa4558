#include "elc/experiment.hpp"

#include <chrono>

#include "elc/checkpoint.hpp"

namespace elc {

report::SelectiveSummary write_evaluation(const std::filesystem::path& dir, const Model& model,
                                          const Evaluation& ev, const SelectiveConfig& sel) {
  std::filesystem::create_directories(dir);
  sel::write_predictions_csv(dir / "predictions.csv", ev.preds);
  report::write_recall_table(dir / "recall_table.csv", model.variant, ev);
  return report::run_selective_report(dir, ev.preds, sel);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const data::GeneratedData& data,
                                const std::filesystem::path& run_dir, const LogHook& on_epoch) {
  cfg.validate();
  ExperimentResult res;
  const auto start = std::chrono::steady_clock::now();
  res.trained = run_training(cfg, data.train, {}, on_epoch);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  res.evaluation = run_evaluation(res.trained.model, data.test);
  res.info = report::describe(res.trained.model, cfg, seconds);
  if (run_dir.empty()) {
    res.selective = report::summarize(res.evaluation.preds, cfg.selective);
    return res;
  }
  std::filesystem::create_directories(run_dir);
  save_checkpoint(run_dir / "model.ckpt", res.trained.model);
  write_epoch_log(run_dir / "train_log.csv", res.trained.log);
  res.selective = write_evaluation(run_dir, res.trained.model, res.evaluation, cfg.selective);
  report::write_run_summary(run_dir / "run_summary.json", res.info, res.evaluation, res.selective);
  return res;
}

}  // namespace elc
