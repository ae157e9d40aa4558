// elc: data generation, training, evaluation and reporting front end.

#include <cstdio>
#include <exception>
#include <fstream>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "elc/checkpoint.hpp"
#include "elc/config.hpp"
#include "elc/datagen.hpp"
#include "elc/error.hpp"
#include "elc/experiment.hpp"
#include "elc/report.hpp"

namespace fs = std::filesystem;
using namespace elc;

namespace {

void print_recalls(const Evaluation& ev) {
  for (const auto& t : ev.tasks) {
    std::printf("  task %d %-10s n=%-6zu recall=%.4f accuracy=%.4f\n", t.task, t.name.c_str(), t.count,
                t.macro_recall, t.accuracy);
  }
  std::printf("  task average recall %.4f\n", ev.task_average);
}

void print_selective(const report::SelectiveSummary& s) {
  std::printf("  coverage %.4f (target %.2f) tau %s\n", s.threshold.coverage, s.coverage_target,
              sel::format_double(s.threshold.tau).c_str());
  std::printf("  recall %.4f -> selective %s, auc %s\n", s.base_recall, sel::format_optional(s.selective_recall).c_str(),
              sel::format_optional(s.auc).c_str());
  if (s.low_snr_samples) {
    std::printf("  low snr (n=%zu): recall %s -> selective %s at coverage %.4f, auc %s\n", s.low_snr_samples,
                sel::format_optional(s.low_snr_base_recall).c_str(),
                sel::format_optional(s.low_snr_selective_recall).c_str(), s.low_snr_coverage,
                sel::format_optional(s.low_snr_auc).c_str());
  }
}

int gen_data(const std::string& config_path, std::string out, bool waveforms) {
  const auto cfg = load_config(config_path);
  if (out.empty()) out = cfg.name + "_data";
  const auto data = data::generate(cfg, waveforms);
  data::write(out, data);
  std::printf("wrote %zu train and %zu test frames to %s\n", data.train.frames.size(), data.test.frames.size(),
              out.c_str());
  return 0;
}

int train(const std::string& config_path, const std::string& data_dir, std::string out,
          const std::optional<std::string>& variant, const std::optional<std::uint64_t>& seed, bool verbose) {
  auto cfg = load_config(config_path);
  if (variant) cfg.model.variant = variant_from_string(*variant);
  if (seed) cfg.seed = *seed;
  cfg.validate();
  if (out.empty()) out = "runs/" + cfg.name + "/" + std::string(to_string(cfg.model.variant)) + "/seed" + std::to_string(cfg.seed);
  const auto data = data_dir.empty() ? data::generate(cfg) : data::read(data_dir);
  fs::create_directories(out);
  {
    std::ofstream os(fs::path(out) / "config.json");
    os << to_json(cfg) << '\n';
  }
  LogHook log;
  if (verbose) {
    log = [](const EpochLog& e) {
      std::fprintf(stderr, "task %zu %-8s epoch %3zu lr %.5f lambda %.2f loss %.5f admm %.5f\n", e.task, e.phase.c_str(),
                   e.epoch, e.learning_rate, e.lambda_kl, e.task_loss, e.admm_loss);
    };
  }
  const auto res = run_experiment(cfg, data, out, log);
  std::printf("%s seed %llu trained in %.1f s -> %s\n", std::string(to_string(cfg.model.variant)).c_str(),
              static_cast<unsigned long long>(cfg.seed), res.info.train_seconds, out.c_str());
  print_recalls(res.evaluation);
  print_selective(res.selective);
  return 0;
}

int eval(const std::string& ckpt, const std::string& data_dir, std::string out, double coverage) {
  const Model model = load_checkpoint(ckpt);
  const auto test = fs::exists(fs::path(data_dir) / "test") ? io::read_frame_dataset(fs::path(data_dir) / "test")
                                                           : io::read_frame_dataset(data_dir);
  if (out.empty()) out = (fs::path(ckpt).parent_path() / "eval").string();
  const auto cfg = parse_config(model.config_json, ckpt);
  SelectiveConfig sc = cfg.selective;
  sc.coverage_target = coverage;
  const Evaluation ev = run_evaluation(model, test);
  const auto s = write_evaluation(out, model, ev, sc);
  std::printf("evaluated %zu frames -> %s\n", ev.preds.size(), out.c_str());
  print_recalls(ev);
  print_selective(s);
  return 0;
}

int selpred(const std::string& preds_path, std::string out, const SelectiveConfig& sc) {
  const auto preds = sel::read_predictions_csv(preds_path);
  if (out.empty()) out = (fs::path(preds_path).parent_path() / "selective").string();
  const auto s = report::run_selective_report(out, preds, sc);
  std::printf("selective report -> %s\n", out.c_str());
  print_selective(s);
  return 0;
}

int aggregate(const std::string& run_dir) {
  const auto agg = report::aggregate_runs(run_dir);
  std::printf("aggregated %zu runs -> %s\n", agg.runs, (fs::path(run_dir) / "table1.csv").string().c_str());
  std::ifstream is(fs::path(run_dir) / "table1.csv");
  std::cout << is.rdbuf();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-aware lifelong radar pulse classifier"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out, ckpt, preds_path, run_dir;
  bool waveforms = false;
  std::optional<std::string> variant;
  std::optional<std::uint64_t> seed;
  double coverage = 0.8;
  SelectiveConfig sc;

  auto* gen = app.add_subcommand("gen-data", "Synthesize, preprocess and split a dataset");
  gen->add_option("config", config_path, "Experiment config (JSON)")->required();
  gen->add_option("-o,--out", out, "Output directory");
  gen->add_flag("--waveforms", waveforms, "Also write the raw waveforms");

  auto* tr = app.add_subcommand("train", "Train, evaluate and report one run");
  tr->add_option("config", config_path, "Experiment config (JSON)")->required();
  tr->add_option("-d,--data", data_dir, "Dataset directory from gen-data (generated in memory if omitted)");
  tr->add_option("-o,--out", out, "Run directory");
  tr->add_option("--variant", variant, "Override the model variant");
  tr->add_option("--seed", seed, "Override the seed");
  bool verbose = false;
  tr->add_flag("-v,--verbose", verbose, "Print one line per epoch");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  ev->add_option("ckpt", ckpt, "Checkpoint file")->required();
  ev->add_option("data", data_dir, "Dataset directory or frame directory")->required();
  ev->add_option("-o,--out", out, "Output directory");
  ev->add_option("--coverage", coverage, "Target coverage")->check(CLI::Range(0.0, 1.0));

  auto* sp = app.add_subcommand("selpred", "Selective prediction report from a predictions CSV");
  sp->add_option("preds", preds_path, "predictions.csv")->required();
  sp->add_option("--coverage", sc.coverage_target, "Target coverage")->check(CLI::Range(0.0, 1.0));
  sp->add_option("--snr-bin", sc.snr_bin_db, "SNR bin width in dB");
  sp->add_option("--low-snr", sc.low_snr_db, "Upper edge of the low-SNR subset in dB");
  sp->add_option("-o,--out", out, "Output directory");

  auto* rp = app.add_subcommand("report", "Aggregate runs into a recall table");
  rp->add_option("run-dir", run_dir, "Directory holding run subdirectories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }

  try {
    if (*gen) return gen_data(config_path, out, waveforms);
    if (*tr) return train(config_path, data_dir, out, variant, seed, verbose);
    if (*ev) return eval(ckpt, data_dir, out, coverage);
    if (*sp) return selpred(preds_path, out, sc);
    if (*rp) return aggregate(run_dir);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return static_cast<int>(ExitCode::kConfig);
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return static_cast<int>(ExitCode::kData);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return static_cast<int>(ExitCode::kNumeric);
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return static_cast<int>(ExitCode::kData);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(ExitCode::kNumeric);
  }
  return 0;
}
