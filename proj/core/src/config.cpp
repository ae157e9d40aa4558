#include "elc/config.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "elc/error.hpp"

namespace elc {

using nlohmann::json;

namespace {

struct VariantName {
  Variant v;
  std::string_view name;
};

constexpr std::array<VariantName, 6> kVariants{{
    {Variant::kStLinear, "ST_Linear"},
    {Variant::kStBayesian, "ST_Bayesian"},
    {Variant::kStEvidential, "ST_Evidential"},
    {Variant::kLps, "LPS"},
    {Variant::kBlc, "BLC"},
    {Variant::kElc, "ELC"},
}};

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

const json& section(const json& j, const char* key) {
  static const json kEmpty = json::object();
  if (!j.contains(key)) return kEmpty;
  const json& s = j.at(key);
  if (!s.is_object()) throw ConfigError(std::string("config section '") + key + "' must be an object");
  return s;
}

}  // namespace

std::string_view to_string(Variant v) {
  for (const auto& e : kVariants) {
    if (e.v == v) return e.name;
  }
  return "?";
}

Variant variant_from_string(std::string_view name) {
  for (const auto& e : kVariants) {
    if (e.name == name) return e.v;
  }
  throw ConfigError("unknown model variant '" + std::string(name) + "'");
}

bool is_lifelong(Variant v) { return v == Variant::kLps || v == Variant::kBlc || v == Variant::kElc; }

HeadKind head_kind(Variant v) {
  switch (v) {
    case Variant::kStLinear:
    case Variant::kLps:
      return HeadKind::kLinear;
    case Variant::kStBayesian:
    case Variant::kBlc:
      return HeadKind::kBayesian;
    case Variant::kStEvidential:
    case Variant::kElc:
      return HeadKind::kEvidential;
  }
  return HeadKind::kLinear;
}

std::string_view to_string(UncertaintyKind k) {
  switch (k) {
    case UncertaintyKind::kEpistemic: return "epistemic";
    case UncertaintyKind::kAleatoric: return "aleatoric";
    case UncertaintyKind::kTotal: return "total";
  }
  return "?";
}

UncertaintyKind uncertainty_from_string(std::string_view name) {
  if (name == "epistemic") return UncertaintyKind::kEpistemic;
  if (name == "aleatoric") return UncertaintyKind::kAleatoric;
  if (name == "total") return UncertaintyKind::kTotal;
  throw ConfigError("unknown uncertainty kind '" + std::string(name) + "'");
}

std::vector<double> ExperimentConfig::alphas() const {
  if (!model.alpha.empty()) return model.alpha;
  const std::size_t n = task_count();
  return std::vector<double>(n, n ? 1.0 / static_cast<double>(n) : 1.0);
}

void ExperimentConfig::validate() const {
  if (data.tasks.empty()) throw ConfigError("at least one task is required");
  for (std::size_t i = 0; i < data.tasks.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (data.tasks[i].family == data.tasks[j].family) {
        throw ConfigError("tasks '" + data.tasks[i].name + "' and '" + data.tasks[j].name +
                          "' share a pulse family; class sets must be disjoint");
      }
    }
  }
  if (data.waveforms_per_class < 2) throw ConfigError("waveforms_per_class must be >= 2");
  if (!(data.test_fraction > 0.0 && data.test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
  if (!(data.snr.step_db > 0.0) || data.snr.max_db < data.snr.min_db) throw ConfigError("invalid SNR grid");
  if (data.overlap_fraction < 0.0 || data.overlap_fraction >= 1.0) throw ConfigError("overlap_fraction must lie in [0, 1)");
  if (data.frame_width != model.backbone.input_width) {
    throw ConfigError("frame_width must equal the backbone input width");
  }

  const auto a = alphas();
  if (a.size() != task_count()) throw ConfigError("alpha list must have one entry per task");
  double sum = 0.0;
  for (double x : a) {
    if (!(x > 0.0 && x <= 1.0)) throw ConfigError("every alpha must lie in (0, 1]");
    sum += x;
  }
  if (sum > 1.0 + 1e-9) throw ConfigError("alpha values sum above 1");
  if (model.beta < 0.0 || model.beta > 1.0) throw ConfigError("beta must lie in [0, 1]");
  if (!(model.nu >= 0.0 && model.nu <= 1.0)) throw ConfigError("nu must lie in [0, 1]");
  if (model.prototypes_per_class == 0) throw ConfigError("prototypes_per_class must be >= 1");
  if (model.lambda_kl < 0.0) throw ConfigError("lambda_kl must be non-negative");
  if (model.mc_samples_train == 0 || model.mc_samples_eval == 0) throw ConfigError("Monte Carlo sample counts must be >= 1");
  if (model.kl_weight && *model.kl_weight < 0.0) throw ConfigError("kl_weight must be non-negative");
  if (model.backbone.widths.empty()) throw ConfigError("backbone needs at least one stage");

  if (train.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (train.admm_epochs + train.finetune_epochs == 0) throw ConfigError("at least one training epoch is required");
  if (!(train.learning_rate > 0.0) || !(train.finetune_learning_rate > 0.0)) throw ConfigError("learning rates must be positive");
  if (train.momentum < 0.0 || train.momentum >= 1.0) throw ConfigError("momentum must lie in [0, 1)");
  if (train.rho < 0.0 || train.tau_admm < 0.0) throw ConfigError("ADMM penalties must be non-negative");
  if (train.grad_clip < 0.0) throw ConfigError("grad_clip must be non-negative");
  if (train.admm_interval == 0) throw ConfigError("admm_interval must be >= 1");

  if (!(selective.coverage_target > 0.0 && selective.coverage_target <= 1.0)) {
    throw ConfigError("coverage_target must lie in (0, 1]");
  }
  if (!(selective.snr_bin_db > 0.0)) throw ConfigError("snr_bin_db must be positive");
}

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  cfg.data.tasks = {{"radnist", signal::Family::kRadNistLike}, {"radchar", signal::Family::kRadCharLike}};
  return cfg;
}

ExperimentConfig parse_config(std::string_view json_text, const std::string& origin) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(origin + ": top level must be an object");

  ExperimentConfig cfg = default_config();
  read(j, "name", cfg.name);
  read(j, "seed", cfg.seed);

  const json& d = section(j, "data");
  if (d.contains("tasks")) {
    cfg.data.tasks.clear();
    if (!d.at("tasks").is_array()) throw ConfigError("data.tasks must be an array");
    for (const auto& t : d.at("tasks")) {
      TaskSpec spec;
      read(t, "name", spec.name);
      std::string family;
      read(t, "family", family);
      spec.family = signal::family_from_string(family);
      if (spec.name.empty()) spec.name = family;
      cfg.data.tasks.push_back(spec);
    }
  }
  read(d, "waveforms_per_class", cfg.data.waveforms_per_class);
  const json& snr = section(d, "snr");
  read(snr, "min_db", cfg.data.snr.min_db);
  read(snr, "max_db", cfg.data.snr.max_db);
  read(snr, "step_db", cfg.data.snr.step_db);
  read(d, "test_fraction", cfg.data.test_fraction);
  read(d, "overlap_fraction", cfg.data.overlap_fraction);
  read(d, "fir_taps", cfg.data.fir_taps);
  read(d, "frame_width", cfg.data.frame_width);

  const json& m = section(j, "model");
  std::string s;
  if (m.contains("variant")) {
    read(m, "variant", s);
    cfg.model.variant = variant_from_string(s);
  }
  const json& b = section(m, "backbone");
  cfg.model.backbone.input_width = cfg.data.frame_width;
  read(b, "input_width", cfg.model.backbone.input_width);
  read(b, "widths", cfg.model.backbone.widths);
  read(b, "residual", cfg.model.backbone.residual);
  if (b.contains("conv")) {
    if (!b.at("conv").is_array()) throw ConfigError("model.backbone.conv must be an array");
    cfg.model.backbone.conv.clear();
    for (const auto& c : b.at("conv")) {
      nn::ConvStage st;
      read(c, "channels", st.channels);
      read(c, "kernel", st.kernel);
      read(c, "stride", st.stride);
      cfg.model.backbone.conv.push_back(st);
    }
  }
  read(b, "pool_bins", cfg.model.backbone.pool_bins);
  read(m, "alpha", cfg.model.alpha);
  read(m, "beta", cfg.model.beta);
  read(m, "nu", cfg.model.nu);
  read(m, "prototypes_per_class", cfg.model.prototypes_per_class);
  read(m, "prototype_noise", cfg.model.prototype_noise);
  read(m, "lambda_kl", cfg.model.lambda_kl);
  read(m, "mc_samples_train", cfg.model.mc_samples_train);
  read(m, "mc_samples_eval", cfg.model.mc_samples_eval);
  if (m.contains("kl_weight") && !m.at("kl_weight").is_null()) {
    double w = 0.0;
    read(m, "kl_weight", w);
    cfg.model.kl_weight = w;
  }
  read(m, "bayes_log_sigma_init", cfg.model.bayes_log_sigma_init);
  if (m.contains("uncertainty")) {
    read(m, "uncertainty", s);
    cfg.model.uncertainty = uncertainty_from_string(s);
  }

  const json& t = section(j, "train");
  read(t, "admm_epochs", cfg.train.admm_epochs);
  read(t, "finetune_epochs", cfg.train.finetune_epochs);
  read(t, "warmup_epochs", cfg.train.warmup_epochs);
  read(t, "batch_size", cfg.train.batch_size);
  read(t, "learning_rate", cfg.train.learning_rate);
  cfg.train.finetune_learning_rate = cfg.train.learning_rate;
  read(t, "finetune_learning_rate", cfg.train.finetune_learning_rate);
  read(t, "momentum", cfg.train.momentum);
  read(t, "weight_decay", cfg.train.weight_decay);
  read(t, "grad_clip", cfg.train.grad_clip);
  read(t, "rho", cfg.train.rho);
  read(t, "tau_admm", cfg.train.tau_admm);
  read(t, "admm_interval", cfg.train.admm_interval);

  const json& sel = section(j, "selective");
  read(sel, "coverage_target", cfg.selective.coverage_target);
  read(sel, "snr_bin_db", cfg.selective.snr_bin_db);
  read(sel, "low_snr_db", cfg.selective.low_snr_db);

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string to_json(const ExperimentConfig& cfg, int indent) {
  json j;
  j["name"] = cfg.name;
  j["seed"] = cfg.seed;
  json tasks = json::array();
  for (const auto& t : cfg.data.tasks) tasks.push_back({{"name", t.name}, {"family", signal::to_string(t.family)}});
  j["data"] = {
      {"tasks", tasks},
      {"waveforms_per_class", cfg.data.waveforms_per_class},
      {"snr", {{"min_db", cfg.data.snr.min_db}, {"max_db", cfg.data.snr.max_db}, {"step_db", cfg.data.snr.step_db}}},
      {"test_fraction", cfg.data.test_fraction},
      {"overlap_fraction", cfg.data.overlap_fraction},
      {"fir_taps", cfg.data.fir_taps},
      {"frame_width", cfg.data.frame_width},
  };
  const auto& bb = cfg.model.backbone;
  json conv = json::array();
  for (const auto& c : bb.conv) conv.push_back({{"channels", c.channels}, {"kernel", c.kernel}, {"stride", c.stride}});
  j["model"] = {
      {"variant", to_string(cfg.model.variant)},
      {"backbone",
       {{"input_width", bb.input_width},
        {"widths", bb.widths},
        {"residual", bb.residual},
        {"conv", conv},
        {"pool_bins", bb.pool_bins}}},
      {"alpha", cfg.alphas()},
      {"beta", cfg.model.beta},
      {"nu", cfg.model.nu},
      {"prototypes_per_class", cfg.model.prototypes_per_class},
      {"prototype_noise", cfg.model.prototype_noise},
      {"lambda_kl", cfg.model.lambda_kl},
      {"mc_samples_train", cfg.model.mc_samples_train},
      {"mc_samples_eval", cfg.model.mc_samples_eval},
      {"kl_weight", cfg.model.kl_weight ? json(*cfg.model.kl_weight) : json(nullptr)},
      {"bayes_log_sigma_init", cfg.model.bayes_log_sigma_init},
      {"uncertainty", to_string(cfg.model.uncertainty)},
  };
  j["train"] = {
      {"admm_epochs", cfg.train.admm_epochs},
      {"finetune_epochs", cfg.train.finetune_epochs},
      {"warmup_epochs", cfg.train.warmup_epochs},
      {"batch_size", cfg.train.batch_size},
      {"learning_rate", cfg.train.learning_rate},
      {"finetune_learning_rate", cfg.train.finetune_learning_rate},
      {"momentum", cfg.train.momentum},
      {"weight_decay", cfg.train.weight_decay},
      {"grad_clip", cfg.train.grad_clip},
      {"rho", cfg.train.rho},
      {"tau_admm", cfg.train.tau_admm},
      {"admm_interval", cfg.train.admm_interval},
  };
  j["selective"] = {
      {"coverage_target", cfg.selective.coverage_target},
      {"snr_bin_db", cfg.selective.snr_bin_db},
      {"low_snr_db", cfg.selective.low_snr_db},
  };
  return j.dump(indent);
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = to_json(cfg, -1);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace elc
