#include <benchmark/benchmark.h>

#include <random>

#include "elc/bayesian.hpp"
#include "elc/config.hpp"
#include "elc/datagen.hpp"
#include "elc/evidential.hpp"
#include "elc/heads.hpp"
#include "elc/nn/network.hpp"
#include "elc/preprocess.hpp"
#include "elc/selpred.hpp"
#include "elc/signalgen.hpp"

using namespace elc;
using nn::Matrix;

namespace {

Matrix randn(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = g(rng);
  return m;
}

signal::LabeledWaveform sample_waveform(signal::Family family, std::size_t cls) {
  Rng rng = make_rng(7, {cls});
  const auto spec = signal::sample_spec(signal::default_family(family).at(cls), rng);
  signal::LabeledWaveform w;
  w.signal = signal::add_awgn(signal::generate_pulse(spec, 11), 0.0, 12);
  return w;
}

void BM_GeneratePulse(benchmark::State& state) {
  const auto dists = signal::default_family(signal::Family::kRadCharLike);
  Rng rng = make_rng(1, {});
  std::uint64_t seed = 0;
  for (auto _ : state) {
    const auto spec = signal::sample_spec(dists[seed % dists.size()], rng);
    benchmark::DoNotOptimize(signal::add_awgn(signal::generate_pulse(spec, seed), -4.0, seed + 1));
    ++seed;
  }
}
BENCHMARK(BM_GeneratePulse);

void BM_PreprocessChain(benchmark::State& state) {
  const auto family = state.range(0) == 0 ? signal::Family::kRadNistLike : signal::Family::kRadCharLike;
  const auto w = sample_waveform(family, 2);
  const auto cfg = data::preprocess_config(default_config().data, family);
  for (auto _ : state) benchmark::DoNotOptimize(prep::preprocess(w, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(w.signal.size()));
}
BENCHMARK(BM_PreprocessChain)->Arg(0)->Arg(1);

void BM_BackboneForward(benchmark::State& state) {
  nn::Network net(nn::BackboneConfig{});
  net.initialize(3);
  const auto values = nn::values_of(net.params());
  const Matrix batch = randn(state.range(0), static_cast<Eigen::Index>(net.input_width()), 4);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(batch, values));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BackboneForward)->Arg(1)->Arg(64);

void BM_TrainingStep(benchmark::State& state) {
  nn::Network net(nn::BackboneConfig{});
  net.initialize(3);
  const auto head = heads::make_linear(net.feature_dim(), 5, 5);
  const Matrix batch = randn(64, static_cast<Eigen::Index>(net.input_width()), 6);
  std::vector<int> labels(64);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 5);
  for (auto _ : state) {
    nn::Tape tape;
    const auto theta = nn::bind_variables(tape, net.params());
    const auto h = nn::bind_variables(tape, head);
    const auto features = net.forward(tape, tape.constant(batch), theta);
    const auto loss = heads::cross_entropy(heads::linear_logits(features, h), labels);
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.gradient(theta.front()));
  }
}
BENCHMARK(BM_TrainingStep)->Unit(benchmark::kMillisecond);

void BM_DempsterCombine(benchmark::State& state) {
  const std::size_t m = static_cast<std::size_t>(state.range(0));
  ds::MassVector a{std::vector<double>(m, 0.5 / static_cast<double>(m)), 0.5};
  ds::MassVector b{std::vector<double>(m, 0.2 / static_cast<double>(m)), 0.8};
  for (auto _ : state) benchmark::DoNotOptimize(ds::dempster_combine(a, b));
}
BENCHMARK(BM_DempsterCombine)->Arg(5)->Arg(20);

void BM_EvidentialHead(benchmark::State& state) {
  const Eigen::Index p = 100, f = 64, m = 5;
  ds::PrototypeBank bank;
  bank.prototypes = randn(p, f, 8);
  bank.scale_logits = Matrix::Zero(1, p);
  bank.membership_logits = randn(p, m, 9);
  bank.log_gamma = Matrix::Constant(1, p, -3.0);
  const auto cfg = ds::UtilityConfig::identity(static_cast<std::size_t>(m));
  const Matrix features = randn(state.range(0), f, 10);
  for (auto _ : state) benchmark::DoNotOptimize(ds::evaluate(features, bank, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EvidentialHead)->Arg(64)->Arg(512);

void BM_BayesianPredict(benchmark::State& state) {
  const auto layer = bayes::VariationalLinear::init(64, 5, 11, -3.0);
  const Matrix features = randn(state.range(0), 64, 12);
  for (auto _ : state) benchmark::DoNotOptimize(bayes::predict(layer, features, 13, 20));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BayesianPredict)->Arg(64)->Arg(512);

void BM_SelectiveSweep(benchmark::State& state) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u01;
  std::vector<sel::ScoredPrediction> preds(static_cast<std::size_t>(state.range(0)));
  for (auto& p : preds) {
    p.truth = static_cast<int>(rng() % 5);
    p.uncertainty = u01(rng);
    p.predicted = u01(rng) > p.uncertainty ? p.truth : (p.truth + 1) % 5;
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(sel::sweep_thresholds(preds));
    benchmark::DoNotOptimize(sel::uncertainty_roc(preds));
  }
}
BENCHMARK(BM_SelectiveSweep)->Arg(1000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
