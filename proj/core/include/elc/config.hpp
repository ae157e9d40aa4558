#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "elc/nn/network.hpp"
#include "elc/signalgen.hpp"

namespace elc {

enum class Variant { kStLinear, kStBayesian, kStEvidential, kLps, kBlc, kElc };

std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view name);  // throws ConfigError
bool is_lifelong(Variant v);

enum class HeadKind { kLinear, kBayesian, kEvidential };
HeadKind head_kind(Variant v);

// Which Bayesian entropy term scores a prediction.
enum class UncertaintyKind { kEpistemic, kAleatoric, kTotal };
std::string_view to_string(UncertaintyKind k);
UncertaintyKind uncertainty_from_string(std::string_view name);

struct TaskSpec {
  std::string name;
  signal::Family family = signal::Family::kRadCharLike;
};

struct DataConfig {
  std::vector<TaskSpec> tasks;
  std::size_t waveforms_per_class = 1000;
  signal::SnrGrid snr;
  double test_fraction = 0.2;
  double overlap_fraction = 0.0;
  int fir_taps = 127;
  std::size_t frame_width = 1024;
};

struct ModelConfig {
  Variant variant = Variant::kElc;
  nn::BackboneConfig backbone;
  std::vector<double> alpha;  // per task; empty means 1 / task count each
  double beta = 0.1;
  double nu = 0.9;
  std::size_t prototypes_per_class = 20;
  double prototype_noise = 0.01;
  double lambda_kl = 10.0;
  std::size_t mc_samples_train = 4;
  std::size_t mc_samples_eval = 20;
  std::optional<double> kl_weight;  // default 1 / training set size
  double bayes_log_sigma_init = -5.0;
  UncertaintyKind uncertainty = UncertaintyKind::kEpistemic;
};

struct TrainConfig {
  std::size_t admm_epochs = 60;
  std::size_t finetune_epochs = 20;
  std::size_t warmup_epochs = 10;
  std::size_t batch_size = 64;
  double learning_rate = 0.05;
  double finetune_learning_rate = 0.02;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double grad_clip = 5.0;  // joint gradient norm cap, 0 disables
  double rho = 1e-2;
  double tau_admm = 1e-2;
  std::size_t admm_interval = 5;
};

struct SelectiveConfig {
  double coverage_target = 0.8;
  double snr_bin_db = 2.0;
  double low_snr_db = -10.0;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 1;
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  SelectiveConfig selective;

  std::size_t task_count() const { return data.tasks.size(); }
  std::vector<double> alphas() const;  // resolved per-task capacities
  void validate() const;               // throws ConfigError
};

ExperimentConfig default_config();
ExperimentConfig parse_config(std::string_view json_text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);
std::string to_json(const ExperimentConfig& cfg, int indent = 2);

// Stable FNV-1a digest of the canonical JSON form.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace elc
