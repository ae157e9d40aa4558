#include "elc/report.hpp"

#include <cmath>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "elc/error.hpp"
#include "elc/lps.hpp"

namespace elc::report {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json optional_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

std::optional<double> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

std::string_view status_name(sel::CoverageStatus s) {
  switch (s) {
    case sel::CoverageStatus::kExact: return "exact";
    case sel::CoverageStatus::kOvershoot: return "overshoot";
    case sel::CoverageStatus::kNearest: return "nearest";
  }
  return "unknown";
}

ordered_json to_json(const SelectiveSummary& s) {
  ordered_json j;
  j["coverage_target"] = s.coverage_target;
  j["tau"] = std::isinf(s.threshold.tau) ? ordered_json("inf") : ordered_json(s.threshold.tau);
  j["coverage"] = s.threshold.coverage;
  j["coverage_status"] = std::string(status_name(s.threshold.status));
  j["samples"] = s.samples;
  j["base_recall"] = s.base_recall;
  j["selective_recall"] = optional_json(s.selective_recall);
  j["auc"] = optional_json(s.auc);
  j["low_snr_samples"] = s.low_snr_samples;
  j["low_snr_base_recall"] = optional_json(s.low_snr_base_recall);
  j["low_snr_selective_recall"] = optional_json(s.low_snr_selective_recall);
  j["low_snr_coverage"] = s.low_snr_coverage;
  j["low_snr_auc"] = optional_json(s.low_snr_auc);
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os << text;
  if (!os) throw DataError("failed writing " + path.string());
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::string fixed(const std::optional<double>& v) {
  if (!v) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

struct Mean {
  double sum = 0.0;
  std::size_t n = 0;
  void add(const std::optional<double>& v) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  std::optional<double> get() const { return n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt; }
};

}  // namespace

SelectiveSummary summarize(std::span<const sel::ScoredPrediction> preds, const SelectiveConfig& cfg) {
  if (!(cfg.coverage_target > 0.0) || cfg.coverage_target > 1.0) {
    throw ConfigError("coverage target must lie in (0, 1]");
  }
  sel::validate(preds);
  SelectiveSummary s;
  s.coverage_target = cfg.coverage_target;
  const auto curve = sel::sweep_thresholds(preds);
  s.threshold = sel::threshold_for_coverage(curve, cfg.coverage_target);
  s.samples = preds.size();
  s.base_recall = sel::base_recall(preds);
  s.selective_recall = sel::selective_metrics(preds, s.threshold.tau).selective_recall;
  s.auc = sel::uncertainty_roc(preds).auc;
  const auto low = sel::filter_snr_at_most(preds, cfg.low_snr_db);
  s.low_snr_samples = low.size();
  if (!low.empty()) {
    s.low_snr_base_recall = sel::base_recall(low);
    const auto m = sel::selective_metrics(low, s.threshold.tau);
    s.low_snr_selective_recall = m.selective_recall;
    s.low_snr_coverage = m.coverage;
    s.low_snr_auc = sel::uncertainty_roc(low).auc;
  }
  return s;
}

void write_selective_summary(const fs::path& path, const SelectiveSummary& s) {
  write_text(path, to_json(s).dump(2) + "\n");
}

SelectiveSummary run_selective_report(const fs::path& dir, std::span<const sel::ScoredPrediction> preds,
                                      const SelectiveConfig& cfg) {
  const SelectiveSummary s = summarize(preds, cfg);
  fs::create_directories(dir);
  sel::write_risk_coverage_csv(dir / "risk_coverage.csv", sel::sweep_thresholds(preds));
  sel::write_snr_csv(dir / "snr_table.csv", sel::snr_binned_recall(preds, s.threshold.tau, cfg.snr_bin_db));
  sel::write_roc_csv(dir / "roc.csv", sel::uncertainty_roc(preds));
  const auto low = sel::filter_snr_at_most(preds, cfg.low_snr_db);
  if (!low.empty()) sel::write_roc_csv(dir / "roc_low_snr.csv", sel::uncertainty_roc(low));
  write_selective_summary(dir / "selective_summary.json", s);
  return s;
}

void write_recall_table(const fs::path& path, Variant variant, const Evaluation& ev) {
  std::ostringstream os;
  os << "dataset,task,variant,task_recall,task_accuracy,task_avg\n";
  for (const auto& t : ev.tasks) {
    os << t.name << ',' << t.task << ',' << to_string(variant) << ',' << sel::format_double(t.macro_recall) << ','
       << sel::format_double(t.accuracy) << ',' << sel::format_double(ev.task_average) << '\n';
  }
  write_text(path, os.str());
}

RunInfo describe(const Model& model, const ExperimentConfig& cfg, double train_seconds) {
  RunInfo info;
  info.name = cfg.name;
  info.variant = model.variant;
  info.seed = cfg.seed;
  info.config_hash = config_hash(cfg);
  info.train_seconds = train_seconds;
  info.alpha_bar = model.state.alpha_bar;
  for (const auto& part : model.state.archive) info.owned_per_task.push_back(lps::count_set(part.owned));
  for (const auto& p : model.net.params()) info.backbone_params += p.size();
  return info;
}

void write_run_summary(const fs::path& path, const RunInfo& info, const Evaluation& ev, const SelectiveSummary& s) {
  ordered_json j;
  j["name"] = info.name;
  j["variant"] = std::string(to_string(info.variant));
  j["seed"] = info.seed;
  j["config_hash"] = info.config_hash;
  j["train_seconds"] = info.train_seconds;
  j["backbone_params"] = info.backbone_params;
  j["alpha_bar"] = info.alpha_bar;
  j["owned_per_task"] = info.owned_per_task;
  ordered_json tasks = ordered_json::array();
  for (const auto& t : ev.tasks) {
    tasks.push_back({{"task", t.task}, {"dataset", t.name}, {"count", t.count}, {"recall", t.macro_recall},
                     {"accuracy", t.accuracy}});
  }
  j["tasks"] = tasks;
  j["task_avg"] = ev.task_average;
  j["overall_accuracy"] = ev.overall_accuracy;
  j["selective"] = to_json(s);
  write_text(path, j.dump(2) + "\n");
}

Aggregate aggregate_runs(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError(root.string() + " is not a directory");
  std::vector<fs::path> tables;
  for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
    if (it.depth() > 3) {
      it.disable_recursion_pending();
      continue;
    }
    if (it->is_regular_file() && it->path().filename() == "recall_table.csv") tables.push_back(it->path());
  }
  std::sort(tables.begin(), tables.end());
  if (tables.empty()) throw DataError("no recall_table.csv found under " + root.string());

  Aggregate agg;
  agg.runs = tables.size();
  std::set<std::string> seen_variants;
  // (task, dataset) -> variant -> mean
  std::map<std::pair<int, std::string>, std::map<std::string, Mean>> cells;
  std::map<std::string, Mean> averages;
  struct SelMeans {
    Mean base, selective, low_base, low_selective, auc, low_auc;
    std::size_t runs = 0;
  };
  std::map<std::string, SelMeans> selective;

  for (const auto& path : tables) {
    std::ifstream is(path);
    std::string line;
    if (!std::getline(is, line) || line.rfind("dataset,task,variant,task_recall", 0) != 0) {
      throw DataError(path.string() + ": unexpected header");
    }
    std::string variant;
    std::optional<double> avg;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto cells_in = split(line);
      if (cells_in.size() < 6) throw DataError(path.string() + ": malformed row");
      try {
        variant = cells_in[2];
        cells[{std::stoi(cells_in[1]), cells_in[0]}][variant].add(std::stod(cells_in[3]));
        avg = std::stod(cells_in[5]);
      } catch (const std::exception&) {
        throw DataError(path.string() + ": malformed number");
      }
    }
    if (variant.empty()) throw DataError(path.string() + ": no rows");
    if (seen_variants.insert(variant).second) agg.variants.push_back(variant);
    averages[variant].add(avg);

    const fs::path summary = path.parent_path() / "run_summary.json";
    if (fs::exists(summary)) {
      json j;
      try {
        std::ifstream ss(summary);
        j = json::parse(ss).at("selective");
      } catch (const json::exception& e) {
        throw DataError(summary.string() + ": " + e.what());
      }
      auto& m = selective[variant];
      ++m.runs;
      m.base.add(optional_from(j, "base_recall"));
      m.selective.add(optional_from(j, "selective_recall"));
      m.low_base.add(optional_from(j, "low_snr_base_recall"));
      m.low_selective.add(optional_from(j, "low_snr_selective_recall"));
      m.auc.add(optional_from(j, "auc"));
      m.low_auc.add(optional_from(j, "low_snr_auc"));
    }
  }

  std::ostringstream t1;
  t1 << "dataset,task";
  for (const auto& v : agg.variants) t1 << ',' << v;
  t1 << '\n';
  for (const auto& [key, by_variant] : cells) {
    t1 << key.second << ',' << key.first;
    for (const auto& v : agg.variants) {
      auto it = by_variant.find(v);
      const auto mean = it == by_variant.end() ? std::nullopt : it->second.get();
      t1 << ',' << (mean ? percent(*mean) : "NA");
      if (mean) agg.rows.push_back({key.second, key.first, v, *mean, it->second.n});
    }
    t1 << '\n';
  }
  t1 << "Task Avg.,";
  for (const auto& v : agg.variants) {
    const auto mean = averages[v].get();
    t1 << ',' << (mean ? percent(*mean) : "NA");
  }
  t1 << '\n';
  write_text(root / "table1.csv", t1.str());

  if (!selective.empty()) {
    std::ostringstream st;
    st << "variant,runs,base_recall,selective_recall,low_snr_base_recall,low_snr_selective_recall,low_snr_gain,auc,"
          "low_snr_auc\n";
    for (const auto& v : agg.variants) {
      auto it = selective.find(v);
      if (it == selective.end()) continue;
      const auto& m = it->second;
      std::optional<double> gain;
      if (m.low_base.get() && m.low_selective.get()) gain = *m.low_selective.get() - *m.low_base.get();
      st << v << ',' << m.runs << ',' << fixed(m.base.get()) << ',' << fixed(m.selective.get()) << ','
         << fixed(m.low_base.get()) << ',' << fixed(m.low_selective.get()) << ',' << fixed(gain) << ','
         << fixed(m.auc.get()) << ',' << fixed(m.low_auc.get()) << '\n';
    }
    write_text(root / "selective_table.csv", st.str());
  }
  return agg;
}

}  // namespace elc::report
