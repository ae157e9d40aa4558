#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "elc/error.hpp"
#include "elc/preprocess.hpp"
#include "testing.hpp"

using namespace elc;
using namespace elc::prep;
using signal::Complex;
using signal::ComplexSignal;

namespace {

ComplexSignal tone(std::size_t n, double freq, double fs, Complex amp = {1.0, 0.0}) {
  ComplexSignal s;
  s.sample_rate = fs;
  for (std::size_t i = 0; i < n; ++i) {
    s.samples.push_back(amp * std::polar(1.0, 2.0 * std::numbers::pi * freq * static_cast<double>(i) / fs));
  }
  return s;
}

void moments(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  sd = std::sqrt(var / static_cast<double>(v.size()));
}

}  // namespace

TEST_CASE("mixer with zero carrier is the identity") {
  const auto x = tone(64, 0.3e6, 3.2e6, {0.3, -0.7});
  CHECK(mix_to_baseband(x, 0.0).samples == x.samples);
}

TEST_CASE("tone at the carrier mixes and filters to a constant") {
  const double fs = 3.2e6, fc = 0.4e6;
  const Complex amp = std::polar(0.8, 0.6);
  const auto base = mix_to_baseband(tone(2048, fc, fs, amp), fc);
  const auto taps = design_lowpass(127, 0.5e6 / fs);
  const auto y = fir_filter(base, taps);
  double ripple = 0.0;
  for (std::size_t i = 63; i + 63 < y.size(); ++i) ripple = std::max(ripple, std::abs(y.samples[i] - amp));
  CHECK(ripple < 1e-3);
}

TEST_CASE("offset tone lands at the offset after mixing") {
  const std::size_t n = 1024;
  const double fs = 3.2e6, fc = 0.4e6;
  const double bin = fs / static_cast<double>(n);
  const double delta = 25 * bin;
  const auto spec = testing::naive_dft(mix_to_baseband(tone(n, fc + delta, fs), fc).samples);
  std::size_t best = 0;
  for (std::size_t k = 1; k < n; ++k) {
    if (std::abs(spec[k]) > std::abs(spec[best])) best = k;
  }
  CHECK(best == 25);
}

TEST_CASE("decimation factor follows the cutoff arithmetic") {
  CHECK(decimation_factor(10e6, 2e6) == 5.0);
  ComplexSignal x;
  x.sample_rate = 10e6;
  x.samples.assign(1000, {1.0, 0.0});
  const auto r = lowpass_decimate(x, 2e6);
  CHECK(r.factor == 5);
  CHECK(r.exact_factor == 5.0);
  CHECK_FALSE(r.passthrough);
  CHECK(r.signal.sample_rate == 2e6);
  CHECK(r.signal.size() == 200);

  SUBCASE("non-integer factor truncates") {
    const auto t = lowpass_decimate(x, 3e6);
    CHECK(t.exact_factor == doctest::Approx(10.0 / 3.0));
    CHECK(t.factor == 3);
  }
}

TEST_CASE("factor one filters without decimating") {
  ComplexSignal x;
  x.sample_rate = 2e6;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int i = 0; i < 300; ++i) x.samples.push_back({g(rng), g(rng)});
  const auto r = lowpass_decimate(x, 2e6);
  CHECK(r.factor == 1);
  CHECK(r.signal.size() == x.size());
  CHECK(r.signal.samples == fir_filter(x, design_lowpass(127, 0.5)).samples);
}

TEST_CASE("factor below one passes the input through") {
  ComplexSignal x;
  x.sample_rate = 1e6;
  x.samples.assign(10, {1.0, 2.0});
  const auto r = lowpass_decimate(x, 4e6);
  CHECK(r.passthrough);
  CHECK(r.signal.samples == x.samples);
}

TEST_CASE("white noise stopband is at least 40 dB down") {
  const double cutoff = 0.1;  // of the sample rate
  const auto taps = design_lowpass(127, cutoff);
  double sum = 0.0;
  for (double t : taps) sum += t;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));

  ComplexSignal x;
  x.sample_rate = 1.0;
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g;
  const std::size_t seg = 512, segs = 24;
  for (std::size_t i = 0; i < seg * segs + 256; ++i) x.samples.push_back({g(rng), g(rng)});
  const auto y = fir_filter(x, taps);

  std::vector<double> psd(seg, 0.0);
  for (std::size_t s = 0; s < segs; ++s) {
    std::vector<Complex> chunk(seg);
    for (std::size_t i = 0; i < seg; ++i) {
      const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / seg);
      chunk[i] = w * y.samples[128 + s * seg + i];
    }
    const auto f = testing::naive_dft(chunk);
    for (std::size_t k = 0; k < seg; ++k) psd[k] += std::norm(f[k]);
  }
  double pass = 0.0, stop = 0.0;
  std::size_t np = 0, ns = 0;
  for (std::size_t k = 0; k < seg; ++k) {
    const double f = std::abs(static_cast<double>(k <= seg / 2 ? k : seg - k) / seg);
    if (f <= cutoff * 0.8) { pass += psd[k]; ++np; }
    if (f >= cutoff + 0.04) { stop += psd[k]; ++ns; }
  }
  const double atten_db = 10.0 * std::log10((pass / np) / (stop / ns));
  CHECK(atten_db >= 40.0);
}

TEST_CASE("interleave places I at even and Q at odd indices") {
  ComplexSignal x;
  x.samples = {{1, 2}, {3, 4}};
  CHECK(interleave_iq(x) == std::vector<double>{1, 2, 3, 4});
  CHECK(interleave_iq(ComplexSignal{}).empty());
  x.samples = {{5, 0}, {-1, 0}, {2, 0}};
  const auto v = interleave_iq(x);
  REQUIRE(v.size() == 6);
  for (std::size_t i = 1; i < v.size(); i += 2) CHECK(v[i] == 0.0);
}

TEST_CASE("framing counts and offsets") {
  PreprocessConfig cfg;
  cfg.sample_rate_hz = 2.0;
  cfg.frame_width = 1024;
  cfg.overlap_fraction = 0.5;
  std::vector<double> v(2048);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(0.01 * static_cast<double>(i * i % 977));
  const auto r = frame_and_standardize(v, cfg, {3, 1, -4.0});
  REQUIRE(r.frames.size() == 3);
  for (std::size_t f = 0; f < 3; ++f) {
    std::vector<double> raw(v.begin() + f * 512, v.begin() + f * 512 + 1024);
    standardize(raw);
    CHECK(r.frames[f].values == raw);
    CHECK(r.frames[f].class_label == 3);
    CHECK(r.frames[f].task_id == 1);
    CHECK(r.frames[f].snr_db == -4.0);
  }
  CHECK(frame_count(2048, cfg) == 3);
  CHECK(frame_count(1023, cfg) == 0);
  const auto shorter = frame_and_standardize(std::vector<double>(1000, 1.0), cfg);
  CHECK(shorter.too_short);
  CHECK(shorter.frames.empty());
}

TEST_CASE("constant frame standardizes to zeros") {
  PreprocessConfig cfg;
  cfg.sample_rate_hz = 2.0;
  const auto r = frame_and_standardize(std::vector<double>(1024, 3.5), cfg);
  REQUIRE(r.frames.size() == 1);
  for (double x : r.frames[0].values) CHECK(x == 0.0);
}

TEST_CASE("single frame moments after standardization") {
  PreprocessConfig cfg;
  cfg.sample_rate_hz = 2.0;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(4.0, 9.0);
  std::vector<double> v(1024);
  for (auto& x : v) x = g(rng);
  const auto r = frame_and_standardize(v, cfg);
  REQUIRE(r.frames.size() == 1);
  double mean, sd;
  moments(r.frames[0].values, mean, sd);
  CHECK(std::abs(mean) < 1e-7);
  CHECK(std::abs(sd - 1.0) < 1e-6);
}

TEST_CASE("full chain frame count is predictable from the config") {
  PreprocessConfig cfg;
  cfg.carrier_hz = 0.4e6;
  cfg.sample_rate_hz = 3.2e6;
  cfg.bandwidth_hz = 1.0e6;
  cfg.frame_width = 256;
  cfg.overlap_fraction = 0.5;
  for (std::size_t n : {100u, 400u, 1000u, 3333u}) {
    signal::LabeledWaveform w;
    w.signal = tone(n, 0.45e6, cfg.sample_rate_hz);
    w.class_label = 2;
    const auto frames = preprocess(w, cfg);
    CAPTURE(n);
    CHECK(frames.size() == predicted_frames(n, cfg));
    for (const auto& f : frames) {
      double mean, sd;
      moments(f.values, mean, sd);
      CHECK(std::abs(mean) < 1e-6);
      CHECK(std::abs(sd * sd - 1.0) < 1e-5);
    }
    const auto again = preprocess(w, cfg);
    for (std::size_t i = 0; i < frames.size(); ++i) CHECK(frames[i].values == again[i].values);
  }
}

TEST_CASE("config validation") {
  PreprocessConfig cfg;
  cfg.sample_rate_hz = 3.2e6;
  cfg.bandwidth_hz = 1e6;
  CHECK_NOTHROW(validate(cfg));
  auto bad = cfg;
  bad.frame_width = 1023;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = cfg;
  bad.overlap_fraction = 1.0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = cfg;
  bad.carrier_hz = 2e6;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = cfg;
  bad.bandwidth_hz = 4e6;
  CHECK_THROWS_AS(validate(bad), ConfigError);
}
