#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "elc/error.hpp"
#include "elc/selpred.hpp"
#include "testing.hpp"

using namespace elc;
using namespace elc::sel;

namespace {

std::vector<ScoredPrediction> make(const std::vector<double>& u, const std::vector<int>& correct,
                                   const std::vector<double>& snr = {}) {
  std::vector<ScoredPrediction> out;
  for (std::size_t i = 0; i < u.size(); ++i) {
    ScoredPrediction p;
    p.truth = static_cast<int>(i % 3);
    p.predicted = correct[i] ? p.truth : (p.truth + 1) % 3;
    p.uncertainty = u[i];
    p.snr_db = snr.empty() ? 0.0 : snr[i];
    out.push_back(p);
  }
  return out;
}

std::vector<ScoredPrediction> random_preds(std::size_t n, std::mt19937_64& rng, int levels) {
  std::uniform_int_distribution<int> lvl(0, levels - 1);
  std::uniform_int_distribution<int> cls(0, 4);
  std::uniform_int_distribution<int> snr(-10, 9);
  std::vector<ScoredPrediction> out(n);
  for (auto& p : out) {
    p.truth = cls(rng);
    // correct samples lean toward lower uncertainty
    const int l = lvl(rng);
    p.predicted = (rng() % static_cast<unsigned>(levels)) >= static_cast<unsigned>(l) ? p.truth : cls(rng);
    p.uncertainty = static_cast<double>(l) / static_cast<double>(levels);
    p.snr_db = 2.0 * snr(rng);
  }
  return out;
}

// P(u_correct < u_wrong) + 0.5 P(tie) by enumerating every pair.
double brute_auc(const std::vector<ScoredPrediction>& preds) {
  double wins = 0.0;
  double pairs = 0.0;
  for (const auto& a : preds) {
    if (!a.correct()) continue;
    for (const auto& b : preds) {
      if (b.correct()) continue;
      pairs += 1.0;
      if (a.uncertainty < b.uncertainty) wins += 1.0;
      else if (a.uncertainty == b.uncertainty) wins += 0.5;
    }
  }
  return wins / pairs;
}

}  // namespace

TEST_CASE("selective metrics examples") {
  const auto p = make({0.1, 0.2, 0.9, 0.8}, {1, 1, 0, 0});
  auto m = selective_metrics(p, 0.5);
  CHECK(m.coverage == 0.5);
  CHECK(*m.selective_recall == 1.0);
  m = selective_metrics(p, 0.85);
  CHECK(m.coverage == 0.75);
  CHECK(*m.selective_recall == doctest::Approx(2.0 / 3.0));
  m = selective_metrics(p, 0.9);
  CHECK(m.coverage == 1.0);
  CHECK(*m.selective_recall == base_recall(p));
  m = selective_metrics(p, 0.05);
  CHECK(m.coverage == 0.0);
  CHECK(m.accepted == 0);
  CHECK_FALSE(m.selective_recall.has_value());
  // ties at the threshold are accepted
  CHECK(selective_metrics(p, 0.2).accepted == 2);
}

TEST_CASE("accept-all threshold reproduces base recall exactly") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = random_preds(1 + rng() % 300, rng, 1 + trial % 40);
    const auto m = selective_metrics(p, kAcceptAll);
    CHECK(m.coverage == 1.0);
    CHECK(m.accepted == p.size());
    CHECK(*m.selective_recall == base_recall(p));
    CHECK(sweep_thresholds(p).back().selective_recall == base_recall(p));
  }
}

TEST_CASE("coverage never decreases with the threshold") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = random_preds(200, rng, 25);
    double prev = -1.0;
    for (double tau = -0.01; tau < 1.05; tau += 0.013) {
      const double c = selective_metrics(p, tau).coverage;
      CHECK(c >= prev);
      prev = c;
    }
    const auto curve = sweep_thresholds(p);
    for (std::size_t i = 1; i < curve.size(); ++i) {
      CHECK(curve[i].coverage >= curve[i - 1].coverage);
      CHECK(curve[i].tau > curve[i - 1].tau);
    }
  }
}

TEST_CASE("metrics depend only on the ordering of uncertainties") {
  std::mt19937_64 rng(3);
  const auto transforms = std::vector<double (*)(double)>{
      [](double u) { return std::exp(3.0 * u); }, [](double u) { return std::sqrt(u) * 7.0 + 2.0; },
      [](double u) { return u * u * u; }};
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_preds(150, rng, 30);
    for (auto f : transforms) {
      auto q = p;
      for (auto& s : q) s.uncertainty = f(s.uncertainty);
      for (double tau : {0.0, 0.1, 0.33, 0.5, 0.9, 1.0}) {
        const auto a = selective_metrics(p, tau);
        const auto b = selective_metrics(q, f(tau));
        CHECK(a.coverage == b.coverage);
        CHECK(a.selective_recall == b.selective_recall);
      }
      CHECK(uncertainty_roc(p).auc == uncertainty_roc(q).auc);
    }
  }
}

TEST_CASE("sweep examples") {
  const auto all_right = make({0.3, 0.1, 0.7, 0.2}, {1, 1, 1, 1});
  for (const auto& pt : sweep_thresholds(all_right)) CHECK(*pt.selective_recall == 1.0);

  const auto flat = make({0.4, 0.4, 0.4}, {1, 0, 1});
  const auto curve = sweep_thresholds(flat);
  REQUIRE(curve.size() == 2);
  CHECK(curve[0].tau == 0.4);
  CHECK(curve[0].coverage == 1.0);
  CHECK(std::isinf(curve[1].tau));

  std::mt19937_64 rng(4);
  auto p = random_preds(100, rng, 1000);
  const auto c = sweep_thresholds(p);
  const auto best = std::min_element(p.begin(), p.end(), [](const auto& a, const auto& b) {
    return a.uncertainty < b.uncertainty;
  });
  const double k = static_cast<double>(std::count_if(p.begin(), p.end(), [&](const auto& s) {
    return s.uncertainty == best->uncertainty;
  }));
  CHECK(c.front().coverage == k / 100.0);
  CHECK(c.front().tau == best->uncertainty);
  CHECK(c.back().coverage == 1.0);
  CHECK(*c.back().selective_recall == base_recall(p));
}

TEST_CASE("threshold for a coverage target") {
  const auto p = make({0.1, 0.2, 0.9, 0.8}, {1, 1, 0, 0});
  const auto curve = sweep_thresholds(p);
  auto ch = threshold_for_coverage(curve, 0.8);
  CHECK(ch.tau == 0.9);
  CHECK(ch.coverage == 1.0);
  CHECK(ch.status == CoverageStatus::kOvershoot);
  ch = threshold_for_coverage(curve, 0.25);
  CHECK(ch.tau == 0.1);
  CHECK(ch.status == CoverageStatus::kExact);
  ch = threshold_for_coverage(curve, 1.0);
  CHECK(std::isinf(ch.tau));
  CHECK(ch.coverage == 1.0);

  const auto tied = sweep_thresholds(make({0.1, 0.1, 0.5, 0.6}, {1, 1, 1, 0}));
  ch = threshold_for_coverage(tied, 0.2);
  CHECK(ch.tau == 0.1);
  CHECK(ch.coverage == 0.5);
  CHECK(ch.status == CoverageStatus::kNearest);

  CHECK_THROWS_AS(threshold_for_coverage(curve, 0.0), ConfigError);
  CHECK_THROWS_AS(threshold_for_coverage(curve, 1.5), ConfigError);
  CHECK_THROWS_AS(threshold_for_coverage(std::span<const RiskCoveragePoint>{}, 0.5), DataError);
}

TEST_CASE("chosen threshold is the smallest that reaches the target") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = random_preds(1 + rng() % 200, rng, 50);
    const auto curve = sweep_thresholds(p);
    const double target = 0.05 + 0.9 * static_cast<double>(rng() % 1000) / 1000.0;
    const auto ch = threshold_for_coverage(curve, target);
    const auto m = selective_metrics(p, ch.tau);
    CHECK(m.coverage == ch.coverage);
    if (ch.status != CoverageStatus::kNearest) CHECK(m.coverage >= target);
    // any smaller observed uncertainty falls short
    double below = -1.0;
    for (const auto& s : p) {
      if (s.uncertainty < ch.tau) below = std::max(below, s.uncertainty);
    }
    if (below >= 0.0 && ch.status != CoverageStatus::kNearest) CHECK(selective_metrics(p, below).coverage < target);
  }
}

TEST_CASE("roc examples") {
  auto roc = uncertainty_roc(make({0.1, 0.9}, {1, 0}));
  CHECK(*roc.auc == 1.0);
  roc = uncertainty_roc(make({0.1, 0.2, 0.3, 0.7, 0.8}, {1, 1, 1, 0, 0}));
  CHECK(*roc.auc == 1.0);
  roc = uncertainty_roc(make({0.9, 0.1}, {1, 0}));
  CHECK(*roc.auc == 0.0);
  roc = uncertainty_roc(make({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}));
  CHECK(*roc.auc == 0.5);
  CHECK(roc.points.front() == std::pair{0.0, 0.0});
  CHECK(roc.points.back() == std::pair{1.0, 1.0});
  CHECK_FALSE(uncertainty_roc(make({0.1, 0.4}, {1, 1})).auc.has_value());
  CHECK_FALSE(uncertainty_roc(make({0.1, 0.4}, {0, 0})).auc.has_value());
}

TEST_CASE("auc equals the pairwise win probability") {
  std::mt19937_64 rng(6);
  double worst = 0.0;
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t n = 2 + rng() % 999;
    auto p = random_preds(n, rng, 1 + trial % 60);
    p[0].predicted = p[0].truth;
    p[1].predicted = (p[1].truth + 1) % 5;
    const auto roc = uncertainty_roc(p);
    REQUIRE(roc.auc.has_value());
    worst = std::max(worst, std::abs(*roc.auc - brute_auc(p)));
    for (std::size_t i = 1; i < roc.points.size(); ++i) {
      CHECK(roc.points[i].first >= roc.points[i - 1].first);
      CHECK(roc.points[i].second >= roc.points[i - 1].second);
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("snr-binned recall") {
  SUBCASE("single bin reduces to the global metrics") {
    const auto p = make({0.1, 0.2, 0.9, 0.8}, {1, 1, 0, 1}, {4.0, 4.5, 5.0, 5.9});
    const auto rows = snr_binned_recall(p, 0.5);
    REQUIRE(rows.size() == 1);
    const auto m = selective_metrics(p, 0.5);
    CHECK(rows[0].snr_bin == 4.0);
    CHECK(rows[0].count == 4);
    CHECK(rows[0].coverage == m.coverage);
    CHECK(rows[0].selective_recall == m.selective_recall);
    CHECK(*rows[0].base_recall == base_recall(p));
  }
  SUBCASE("clean bin with all-correct predictions") {
    const auto p = make({0.01, 0.02, 0.6}, {1, 1, 1}, {18.0, 18.0, 18.0});
    const auto rows = snr_binned_recall(p, 0.5);
    CHECK(*rows[0].base_recall == 1.0);
    CHECK(*rows[0].selective_recall == 1.0);
  }
  SUBCASE("errors rejected inside a noisy bin lift its selective recall") {
    const auto p = make({0.1, 0.2, 0.8, 0.9, 0.1, 0.15}, {1, 1, 0, 0, 1, 1}, {-20, -19, -20, -19, 10, 11});
    const auto rows = snr_binned_recall(p, 0.5);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].snr_bin == -20.0);
    CHECK(*rows[0].base_recall == 0.5);
    CHECK(*rows[0].selective_recall == 1.0);
    CHECK(rows[0].coverage == 0.5);
    CHECK(rows[1].snr_bin == 10.0);
    CHECK(rows[1].coverage == 1.0);
  }
  SUBCASE("bin with nothing accepted has no recall") {
    const auto p = make({0.9, 0.1}, {1, 1}, {-4.0, 6.0});
    const auto rows = snr_binned_recall(p, 0.5);
    CHECK_FALSE(rows[0].selective_recall.has_value());
    CHECK(rows[0].coverage == 0.0);
  }
  CHECK(snr_bin_of(-3.0, 2.0) == -4.0);
  CHECK(snr_bin_of(-2.0, 2.0) == -2.0);
  CHECK(snr_bin_of(1.9999999999999, 2.0) == 2.0);
  CHECK_THROWS_AS(snr_bin_of(1.0, 0.0), ConfigError);
  const auto low = filter_snr_at_most(make({0.1, 0.2, 0.3}, {1, 0, 1}, {-12.0, -10.0, -8.0}), -10.0);
  CHECK(low.size() == 2);
}

TEST_CASE("macro recall averages the classes present") {
  std::vector<ScoredPrediction> p(4);
  p[0] = {0, 0, 0.1, 0.0, 0};
  p[1] = {0, 0, 0.1, 0.0, 0};
  p[2] = {1, 0, 0.1, 0.0, 0};
  p[3] = {2, 1, 0.1, 0.0, 0};
  CHECK(base_recall(p) == 0.5);
  CHECK(macro_recall(p) == doctest::Approx((2.0 / 3.0 + 0.0) / 2.0));
}

TEST_CASE("invalid prediction lists are rejected") {
  CHECK_THROWS_AS(selective_metrics({}, 0.5), DataError);
  CHECK_THROWS_AS(sweep_thresholds({}), DataError);
  CHECK_THROWS_AS(uncertainty_roc({}), DataError);
  CHECK_THROWS_AS(selective_metrics(make({-0.1}, {1}), 0.5), DataError);
  CHECK_THROWS_AS(selective_metrics(make({std::nan("")}, {1}), 0.5), DataError);
  CHECK_THROWS_AS(selective_metrics(make({INFINITY}, {1}), 0.5), DataError);
}

TEST_CASE("prediction csv round trip") {
  testing::TempDir dir;
  std::mt19937_64 rng(7);
  auto p = random_preds(50, rng, 1000);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i].task = static_cast<int>(i % 2);
    p[i].uncertainty = std::ldexp(static_cast<double>(rng() >> 11), -53) * 1.7;
    p[i].snr_db = -20.0 + 0.1 * static_cast<double>(i);
  }
  write_predictions_csv(dir / "preds.csv", p);
  const auto q = read_predictions_csv(dir / "preds.csv");
  REQUIRE(q.size() == p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(q[i].task == p[i].task);
    CHECK(q[i].truth == p[i].truth);
    CHECK(q[i].predicted == p[i].predicted);
    CHECK(q[i].uncertainty == p[i].uncertainty);
    CHECK(q[i].snr_db == p[i].snr_db);
  }

  const auto curve = sweep_thresholds(p);
  write_risk_coverage_csv(dir / "rc.csv", curve);
  write_roc_csv(dir / "roc.csv", uncertainty_roc(p));
  std::ifstream rc(dir / "rc.csv");
  std::string line;
  std::getline(rc, line);
  CHECK(line == "tau,coverage,selective_recall");
  std::size_t rows = 0;
  std::string last;
  while (std::getline(rc, line)) {
    ++rows;
    last = line;
  }
  CHECK(rows == curve.size());
  CHECK(last.rfind("inf,1,", 0) == 0);

  std::ifstream roc(dir / "roc.csv");
  std::getline(roc, line);
  CHECK(line == "fpr,tpr");
  while (std::getline(roc, line)) last = line;
  CHECK(last.rfind("# auc,", 0) == 0);
}

TEST_CASE("malformed prediction csv is a data error") {
  testing::TempDir dir;
  CHECK_THROWS_AS(read_predictions_csv(dir / "missing.csv"), DataError);
  {
    std::ofstream os(dir / "nocol.csv");
    os << "sample,task,true_class,predicted_class,snr_db\n0,0,1,1,3\n";
  }
  CHECK_THROWS_AS(read_predictions_csv(dir / "nocol.csv"), DataError);
  {
    std::ofstream os(dir / "bad.csv");
    os << "sample,task,true_class,predicted_class,uncertainty,snr_db\n0,0,1,1,abc,3\n";
  }
  CHECK_THROWS_AS(read_predictions_csv(dir / "bad.csv"), DataError);
  {
    std::ofstream os(dir / "short.csv");
    os << "sample,task,true_class,predicted_class,uncertainty,snr_db\n0,0,1,1\n";
  }
  CHECK_THROWS_AS(read_predictions_csv(dir / "short.csv"), DataError);
  {
    std::ofstream os(dir / "empty.csv");
    os << "sample,task,true_class,predicted_class,uncertainty,snr_db\n";
  }
  CHECK_THROWS_AS(read_predictions_csv(dir / "empty.csv"), DataError);
}
