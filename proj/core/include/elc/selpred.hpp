#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

// Threshold-based abstention: accept a prediction when its uncertainty is at
// most tau.
namespace elc::sel {

inline constexpr double kAcceptAll = std::numeric_limits<double>::infinity();

struct ScoredPrediction {
  int predicted = 0;
  int truth = 0;
  double uncertainty = 0.0;
  double snr_db = 0.0;
  int task = 0;

  bool correct() const { return predicted == truth; }
};

// An empty accepted set leaves the recall unset.
struct SelectiveMetrics {
  std::optional<double> selective_recall;
  double coverage = 0.0;
  std::size_t accepted = 0;
  std::size_t total = 0;
};

struct RiskCoveragePoint {
  double tau = 0.0;
  double coverage = 0.0;
  std::optional<double> selective_recall;
};

enum class CoverageStatus {
  kExact,      // realised coverage equals the target
  kOvershoot,  // smallest achievable coverage above the target
  kNearest,    // target below every achievable coverage; the smallest was taken
};

struct ThresholdChoice {
  double tau = kAcceptAll;
  double coverage = 1.0;
  CoverageStatus status = CoverageStatus::kExact;
};

struct SnrBinRow {
  double snr_bin = 0.0;  // lower edge in dB
  std::size_t count = 0;
  std::optional<double> base_recall;
  std::optional<double> selective_recall;
  double coverage = 0.0;
};

struct RocCurve {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr), from (0,0) to (1,1)
  std::optional<double> auc;
};

// Throws DataError on empty input or a negative/non-finite uncertainty.
void validate(std::span<const ScoredPrediction> preds);

double base_recall(std::span<const ScoredPrediction> preds);
// Mean of per-class recalls over classes present in `preds`.
double macro_recall(std::span<const ScoredPrediction> preds);

SelectiveMetrics selective_metrics(std::span<const ScoredPrediction> preds, double tau);

// One point per distinct uncertainty plus the accept-all sentinel, by
// coverage ascending.
std::vector<RiskCoveragePoint> sweep_thresholds(std::span<const ScoredPrediction> preds);

// Smallest tau whose coverage reaches the target; a target of 1 accepts all.
ThresholdChoice threshold_for_coverage(std::span<const RiskCoveragePoint> curve, double target);

double snr_bin_of(double snr_db, double bin_width_db);
std::vector<SnrBinRow> snr_binned_recall(std::span<const ScoredPrediction> preds, double tau,
                                         double bin_width_db = 2.0);

// Low uncertainty scores the "correct" class. AUC is unset unless both
// correct and incorrect samples are present.
RocCurve uncertainty_roc(std::span<const ScoredPrediction> preds);

std::vector<ScoredPrediction> filter_snr_at_most(std::span<const ScoredPrediction> preds, double max_snr_db);

// --- CSV ------------------------------------------------------------------------

std::string format_optional(const std::optional<double>& v);
std::string format_double(double v);

void write_predictions_csv(const std::filesystem::path& path, std::span<const ScoredPrediction> preds);
std::vector<ScoredPrediction> read_predictions_csv(const std::filesystem::path& path);

void write_risk_coverage_csv(const std::filesystem::path& path, std::span<const RiskCoveragePoint> curve);
void write_snr_csv(const std::filesystem::path& path, std::span<const SnrBinRow> rows);
void write_roc_csv(const std::filesystem::path& path, const RocCurve& roc);

}  // namespace elc::sel
