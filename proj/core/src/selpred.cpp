#include "elc/selpred.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "elc/error.hpp"

namespace elc::sel {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  return os;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    if (s == "inf") return kAcceptAll;
    throw DataError("bad number '" + s + "' in " + where);
  }
  return v;
}

int parse_int(const std::string& s, const std::string& where) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw DataError("bad integer '" + s + "' in " + where);
  return v;
}

}  // namespace

void validate(std::span<const ScoredPrediction> preds) {
  if (preds.empty()) throw DataError("selective prediction: empty prediction list");
  for (const auto& p : preds) {
    if (!std::isfinite(p.uncertainty) || p.uncertainty < 0.0) {
      throw DataError("selective prediction: uncertainty must be finite and non-negative");
    }
  }
}

double base_recall(std::span<const ScoredPrediction> preds) {
  validate(preds);
  std::size_t ok = 0;
  for (const auto& p : preds) ok += p.correct() ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(preds.size());
}

double macro_recall(std::span<const ScoredPrediction> preds) {
  validate(preds);
  std::map<int, std::pair<std::size_t, std::size_t>> per_class;
  for (const auto& p : preds) {
    auto& [ok, n] = per_class[p.truth];
    ok += p.correct() ? 1 : 0;
    ++n;
  }
  double sum = 0.0;
  for (const auto& [cls, c] : per_class) sum += static_cast<double>(c.first) / static_cast<double>(c.second);
  return sum / static_cast<double>(per_class.size());
}

SelectiveMetrics selective_metrics(std::span<const ScoredPrediction> preds, double tau) {
  validate(preds);
  SelectiveMetrics m;
  m.total = preds.size();
  std::size_t ok = 0;
  for (const auto& p : preds) {
    if (p.uncertainty <= tau) {
      ++m.accepted;
      ok += p.correct() ? 1 : 0;
    }
  }
  m.coverage = static_cast<double>(m.accepted) / static_cast<double>(m.total);
  if (m.accepted > 0) m.selective_recall = static_cast<double>(ok) / static_cast<double>(m.accepted);
  return m;
}

std::vector<RiskCoveragePoint> sweep_thresholds(std::span<const ScoredPrediction> preds) {
  validate(preds);
  std::vector<std::pair<double, bool>> sorted;
  sorted.reserve(preds.size());
  for (const auto& p : preds) sorted.emplace_back(p.uncertainty, p.correct());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<RiskCoveragePoint> curve;
  const auto n = static_cast<double>(sorted.size());
  std::size_t accepted = 0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double tau = sorted[i].first;
    while (i < sorted.size() && sorted[i].first == tau) {
      ++accepted;
      ok += sorted[i].second ? 1 : 0;
      ++i;
    }
    curve.push_back({tau, static_cast<double>(accepted) / n, static_cast<double>(ok) / static_cast<double>(accepted)});
  }
  curve.push_back({kAcceptAll, 1.0, static_cast<double>(ok) / n});
  return curve;
}

ThresholdChoice threshold_for_coverage(std::span<const RiskCoveragePoint> curve, double target) {
  if (!(target > 0.0 && target <= 1.0)) throw ConfigError("coverage target must lie in (0, 1]");
  if (curve.empty()) throw DataError("threshold_for_coverage: empty curve");
  if (target >= 1.0) return {kAcceptAll, 1.0, CoverageStatus::kExact};
  for (const auto& pt : curve) {
    if (pt.coverage >= target) {
      CoverageStatus status = pt.coverage == target ? CoverageStatus::kExact : CoverageStatus::kOvershoot;
      if (&pt == &curve.front() && pt.coverage > target) status = CoverageStatus::kNearest;
      return {pt.tau, pt.coverage, status};
    }
  }
  return {kAcceptAll, 1.0, CoverageStatus::kExact};
}

double snr_bin_of(double snr_db, double bin_width_db) {
  if (!(bin_width_db > 0.0)) throw ConfigError("SNR bin width must be positive");
  // Tolerate grid values that land a hair below a bin edge.
  return std::floor(snr_db / bin_width_db + 1e-9) * bin_width_db;
}

std::vector<SnrBinRow> snr_binned_recall(std::span<const ScoredPrediction> preds, double tau, double bin_width_db) {
  validate(preds);
  struct Acc {
    std::size_t n = 0, ok = 0, accepted = 0, accepted_ok = 0;
  };
  std::map<double, Acc> bins;
  for (const auto& p : preds) {
    Acc& a = bins[snr_bin_of(p.snr_db, bin_width_db)];
    ++a.n;
    a.ok += p.correct() ? 1 : 0;
    if (p.uncertainty <= tau) {
      ++a.accepted;
      a.accepted_ok += p.correct() ? 1 : 0;
    }
  }
  std::vector<SnrBinRow> rows;
  for (const auto& [bin, a] : bins) {
    SnrBinRow r;
    r.snr_bin = bin;
    r.count = a.n;
    r.base_recall = static_cast<double>(a.ok) / static_cast<double>(a.n);
    if (a.accepted > 0) r.selective_recall = static_cast<double>(a.accepted_ok) / static_cast<double>(a.accepted);
    r.coverage = static_cast<double>(a.accepted) / static_cast<double>(a.n);
    rows.push_back(r);
  }
  return rows;
}

RocCurve uncertainty_roc(std::span<const ScoredPrediction> preds) {
  validate(preds);
  std::vector<std::pair<double, bool>> sorted;
  std::size_t pos = 0;
  for (const auto& p : preds) {
    sorted.emplace_back(p.uncertainty, p.correct());
    pos += p.correct() ? 1 : 0;
  }
  const std::size_t neg = preds.size() - pos;
  RocCurve roc;
  if (pos == 0 || neg == 0) return roc;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  roc.points.emplace_back(0.0, 0.0);
  std::size_t tp = 0;
  std::size_t fp = 0;
  double auc = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double u = sorted[i].first;
    while (i < sorted.size() && sorted[i].first == u) {
      (sorted[i].second ? tp : fp) += 1;
      ++i;
    }
    const double tpr = static_cast<double>(tp) / static_cast<double>(pos);
    const double fpr = static_cast<double>(fp) / static_cast<double>(neg);
    const auto& [fpr0, tpr0] = roc.points.back();
    auc += (fpr - fpr0) * (tpr + tpr0) * 0.5;
    roc.points.emplace_back(fpr, tpr);
  }
  roc.auc = auc;
  return roc;
}

std::vector<ScoredPrediction> filter_snr_at_most(std::span<const ScoredPrediction> preds, double max_snr_db) {
  std::vector<ScoredPrediction> out;
  for (const auto& p : preds) {
    if (p.snr_db <= max_snr_db + 1e-9) out.push_back(p);
  }
  return out;
}

// --- CSV ------------------------------------------------------------------------------

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

void write_predictions_csv(const std::filesystem::path& path, std::span<const ScoredPrediction> preds) {
  auto os = open_out(path);
  os << "sample,task,true_class,predicted_class,uncertainty,snr_db\n";
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& p = preds[i];
    os << i << ',' << p.task << ',' << p.truth << ',' << p.predicted << ',' << format_double(p.uncertainty) << ','
       << format_double(p.snr_db) << '\n';
  }
  if (!os) throw DataError("failed writing " + path.string());
}

std::vector<ScoredPrediction> read_predictions_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw DataError(path.string() + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  const auto col = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(path.string() + ": missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_task = col("task");
  const std::size_t c_true = col("true_class");
  const std::size_t c_pred = col("predicted_class");
  const std::size_t c_unc = col("uncertainty");
  const std::size_t c_snr = col("snr_db");

  std::vector<ScoredPrediction> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw DataError(path.string() + ":" + std::to_string(lineno) + ": wrong column count");
    const std::string where = path.string() + ":" + std::to_string(lineno);
    ScoredPrediction p;
    p.task = parse_int(cells[c_task], where);
    p.truth = parse_int(cells[c_true], where);
    p.predicted = parse_int(cells[c_pred], where);
    p.uncertainty = parse_double(cells[c_unc], where);
    p.snr_db = parse_double(cells[c_snr], where);
    out.push_back(p);
  }
  validate(out);
  return out;
}

void write_risk_coverage_csv(const std::filesystem::path& path, std::span<const RiskCoveragePoint> curve) {
  auto os = open_out(path);
  os << "tau,coverage,selective_recall\n";
  for (const auto& pt : curve) {
    os << format_double(pt.tau) << ',' << format_double(pt.coverage) << ',' << format_optional(pt.selective_recall)
       << '\n';
  }
}

void write_snr_csv(const std::filesystem::path& path, std::span<const SnrBinRow> rows) {
  auto os = open_out(path);
  os << "snr_bin,base_recall,selective_recall,coverage\n";
  for (const auto& r : rows) {
    os << format_double(r.snr_bin) << ',' << format_optional(r.base_recall) << ','
       << format_optional(r.selective_recall) << ',' << format_double(r.coverage) << '\n';
  }
}

void write_roc_csv(const std::filesystem::path& path, const RocCurve& roc) {
  auto os = open_out(path);
  os << "fpr,tpr\n";
  for (const auto& [fpr, tpr] : roc.points) os << format_double(fpr) << ',' << format_double(tpr) << '\n';
  os << "# auc," << format_optional(roc.auc) << '\n';
}

}  // namespace elc::sel
