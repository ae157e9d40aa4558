#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "elc/error.hpp"
#include "elc/signalgen.hpp"
#include "testing.hpp"

using namespace elc;
using namespace elc::signal;

namespace {

PulseSpec radchar(Scheme s) {
  PulseSpec p;
  p.family = Family::kRadCharLike;
  p.scheme = s;
  p.carrier_offset = 0.0;
  return p;
}

double power_on_pulse(const ComplexSignal& x, const std::vector<bool>& on) {
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!on[i]) continue;
    acc += std::norm(x.samples[i]);
    ++n;
  }
  return acc / static_cast<double>(n);
}

double noise_power(const ComplexSignal& noisy, const ComplexSignal& clean) {
  double acc = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) acc += std::norm(noisy.samples[i] - clean.samples[i]);
  return acc / static_cast<double>(clean.size());
}

ComplexSignal ones(std::size_t n) {
  ComplexSignal s;
  s.sample_rate = 1.0;
  s.samples.assign(n, {1.0, 0.0});
  return s;
}

}  // namespace

TEST_CASE("lfm instantaneous frequency sweeps the bandwidth linearly") {
  PulseSpec p = radchar(Scheme::kLfm);
  p.pulse_width = 10e-6;
  p.bandwidth = 1e6;
  p.sample_rate = 3.2e6;
  const auto x = generate_pulse(p, 7);
  REQUIRE(x.size() == 32);

  std::vector<double> f;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    f.push_back(std::arg(x.samples[i + 1] * std::conj(x.samples[i])) * p.sample_rate / (2.0 * std::numbers::pi));
  }
  const double step = p.bandwidth / p.pulse_width / p.sample_rate;
  for (std::size_t i = 0; i + 1 < f.size(); ++i) CHECK(f[i + 1] - f[i] == doctest::Approx(step).epsilon(1e-9));
  CHECK(f.front() >= -p.bandwidth / 2);
  CHECK(f.back() <= p.bandwidth / 2);
  // the sampled sweep covers all but one sample period of the band
  CHECK(f.back() - f.front() == doctest::Approx(p.bandwidth * (x.size() - 2) / x.size()).epsilon(1e-9));
}

TEST_CASE("barker-13 chips follow the tabulated sign sequence") {
  const int signs[13] = {+1, +1, +1, +1, +1, -1, -1, +1, +1, -1, +1, -1, +1};
  PulseSpec p = radchar(Scheme::kBarker);
  p.code_length = 13;
  p.sample_rate = 3.2e6;
  p.pulse_width = 130.0 / p.sample_rate;  // ten samples per chip
  p.pri = p.pulse_width;
  const auto x = generate_pulse(p, 1);
  REQUIRE(x.size() == 130);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CAPTURE(i);
    CHECK(std::abs(x.samples[i]) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(x.samples[i].real() == doctest::Approx(signs[i / 10]).epsilon(1e-12));
    CHECK(std::abs(x.samples[i].imag()) < 1e-12);
  }
  const auto table = barker_phases(13);
  REQUIRE(table.size() == 13);
  for (int c = 0; c < 13; ++c) CHECK(std::cos(table[c]) == doctest::Approx(signs[c]));
}

TEST_CASE("barker-13 autocorrelation peak to sidelobe is 13 at high snr") {
  PulseSpec p = radchar(Scheme::kBarker);
  p.code_length = 13;
  p.pulse_width = 13.0 / p.sample_rate;  // one sample per chip
  p.pri = p.pulse_width;
  const auto x = add_awgn(generate_pulse(p, 3), 60.0, 11);
  REQUIRE(x.size() == 13);
  double peak = 0.0, side = 0.0;
  for (int lag = 0; lag < 13; ++lag) {
    std::complex<double> r{};
    for (int i = 0; i + lag < 13; ++i) r += x.samples[i + lag] * std::conj(x.samples[i]);
    if (lag == 0) peak = std::abs(r);
    else side = std::max(side, std::abs(r));
  }
  CHECK(peak / side >= 13.0 - 0.1);
}

TEST_CASE("unmodulated pulse main lobe is two over the pulse width") {
  PulseSpec p;
  p.family = Family::kRadNistLike;
  p.scheme = Scheme::kP0NUnmod;
  p.pulse_width = 10e-6;
  p.pri = p.pulse_width;
  p.sample_rate = 3.2e6;
  p.window_samples = 4096;
  const auto x = generate_pulse(p, 0);
  const auto spec = testing::naive_dft(x.samples);
  std::vector<double> mag(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) mag[k] = std::abs(spec[k]);
  REQUIRE(std::max_element(mag.begin(), mag.end()) - mag.begin() == 0);

  std::size_t up = 0;
  while (mag[up + 1] < mag[up]) ++up;
  std::size_t down = 0;
  auto at = [&](std::size_t k) { return mag[(spec.size() - k) % spec.size()]; };
  while (at(down + 1) < at(down)) ++down;
  const double bin = p.sample_rate / static_cast<double>(spec.size());
  const double width = static_cast<double>(up + down) * bin;
  CHECK(width == doctest::Approx(2.0 / p.pulse_width).epsilon(0.05));
}

TEST_CASE("every default scheme has unit power over the on-pulse region") {
  for (Family fam : {Family::kRadCharLike, Family::kRadNistLike}) {
    for (const auto& dist : default_family(fam)) {
      PulseSpec p = dist.base;
      p.pulses_per_burst = 3;
      p.pri = 2.5 * p.pulse_width;
      CAPTURE(to_string(p.scheme));
      const auto x = generate_pulse(p, 5);
      const auto on = on_pulse_mask(p);
      REQUIRE(on.size() == x.size());
      CHECK(std::abs(power_on_pulse(x, on) - 1.0) < 1e-6);
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (!on[i]) CHECK(x.samples[i] == std::complex<double>{});
      }
    }
  }
}

TEST_CASE("scheme outside its family is rejected") {
  PulseSpec p = radchar(Scheme::kQ3NFrank);
  CHECK_THROWS_AS(generate_pulse(p, 0), ConfigError);
  p.scheme = Scheme::kLfm;
  p.pri = p.pulse_width / 2;
  CHECK_THROWS_AS(generate_pulse(p, 0), ConfigError);
}

TEST_CASE("awgn power follows the requested snr") {
  const auto clean = ones(100000);
  SUBCASE("0 dB gives unit noise power") {
    const auto y = add_awgn(clean, 0.0, 42);
    CHECK(noise_power(y, clean) == doctest::Approx(1.0).epsilon(0.02));
  }
  SUBCASE("-20 dB is estimated within half a dB") {
    const auto y = add_awgn(clean, -20.0, 43);
    const double est = 10.0 * std::log10(mean_power(clean) / noise_power(y, clean));
    CHECK(est >= -20.5);
    CHECK(est <= -19.5);
  }
  SUBCASE("measured snr within half a dB across the grid") {
    for (double snr : SnrGrid{}.values()) {
      const auto y = add_awgn(clean, snr, static_cast<std::uint64_t>(snr + 100));
      CHECK(std::abs(10.0 * std::log10(1.0 / noise_power(y, clean)) - snr) < 0.5);
    }
  }
  SUBCASE("infinite snr is the identity") {
    const auto y = add_awgn(clean, kNoNoise, 1);
    CHECK(y.samples == clean.samples);
  }
  SUBCASE("same seed, same noise") {
    CHECK(add_awgn(clean, 3.0, 9).samples == add_awgn(clean, 3.0, 9).samples);
    CHECK(add_awgn(clean, 3.0, 9).samples != add_awgn(clean, 3.0, 10).samples);
  }
}

TEST_CASE("awgn rejects zero-power input") {
  ComplexSignal z;
  z.samples.assign(16, {});
  CHECK_THROWS_AS(add_awgn(z, 0.0, 0), DataError);
  CHECK_THROWS_AS(add_awgn(ComplexSignal{}, 0.0, 0), DataError);
}

TEST_CASE("pulse generation is deterministic for a seed") {
  PulseSpec p = radchar(Scheme::kFrank);
  p.code_length = 4;
  p.random_phase = true;
  CHECK(generate_pulse(p, 5).samples == generate_pulse(p, 5).samples);
  CHECK(generate_pulse(p, 5).samples != generate_pulse(p, 6).samples);
}

TEST_CASE("dataset builder is balanced and covers the snr grid") {
  std::vector<ClassSpec> classes;
  const auto fam = default_family(Family::kRadCharLike);
  for (std::size_t c = 0; c < fam.size(); ++c) classes.push_back({fam[c], static_cast<int>(c), 0});
  const SnrGrid grid{-20.0, 18.0, 2.0};
  const auto ws = build_dataset(classes, 100, grid, 1234);
  REQUIRE(ws.size() == 500);

  std::map<int, int> per_class;
  std::set<double> bins;
  const auto values = grid.values();
  CHECK(values.size() == 20);
  for (const auto& w : ws) {
    ++per_class[w.class_label];
    bins.insert(w.snr_db);
    CHECK(std::find(values.begin(), values.end(), w.snr_db) != values.end());
  }
  for (const auto& [c, n] : per_class) CHECK(n == 100);
  CHECK(bins.size() == 20);

  const auto again = build_dataset(classes, 100, grid, 1234);
  for (std::size_t i = 0; i < ws.size(); ++i) {
    CHECK(ws[i].signal.samples == again[i].signal.samples);
    CHECK(ws[i].snr_db == again[i].snr_db);
  }
}

TEST_CASE("zero jitter class differs only by noise") {
  PulseDistribution d;
  d.base = radchar(Scheme::kBarker);
  d.base.code_length = 7;
  d.base.pulse_width = 100e-6;
  d.base.pri = 100e-6;
  d.pulse_width = {100e-6, 100e-6};
  d.pri = {100e-6, 100e-6};
  const auto ws = build_dataset({{d, 0, 0}}, 12, SnrGrid{10.0, 10.0, 2.0}, 77);
  const auto clean = generate_pulse(d.base, ws.front().seed);
  for (const auto& w : ws) {
    CHECK(w.seed == ws.front().seed);
    REQUIRE(w.signal.size() == clean.size());
    const double ratio = noise_power(w.signal, clean) / mean_power(clean);
    CHECK(ratio == doctest::Approx(0.1).epsilon(0.25));
  }
}

TEST_CASE("dataset builder rejects bad inputs") {
  CHECK_THROWS_AS(build_dataset({}, 10, SnrGrid{}, 0), ConfigError);
  PulseDistribution d;
  d.base = radchar(Scheme::kLfm);
  CHECK_THROWS_AS(build_dataset({{d, 0, 0}}, 10, SnrGrid{-20.0, 17.0, 2.0}, 0), ConfigError);
}
