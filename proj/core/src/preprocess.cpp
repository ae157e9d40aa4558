#include "elc/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "elc/error.hpp"

namespace elc::prep {

namespace {

constexpr double kStdFloor = 1e-12;

}  // namespace

void validate(const PreprocessConfig& cfg) {
  if (!(cfg.bandwidth_hz > 0.0) || !(cfg.sample_rate_hz > cfg.bandwidth_hz)) {
    throw ConfigError("preprocess: require sample_rate > bandwidth > 0");
  }
  if (cfg.frame_width == 0 || cfg.frame_width % 2 != 0) {
    throw ConfigError("preprocess: frame_width must be even and positive");
  }
  if (!(cfg.overlap_fraction >= 0.0 && cfg.overlap_fraction < 1.0)) {
    throw ConfigError("preprocess: overlap_fraction must lie in [0, 1)");
  }
  if (cfg.carrier_hz < 0.0 || cfg.carrier_hz >= cfg.sample_rate_hz / 2.0) {
    throw ConfigError("preprocess: carrier must lie below f_s / 2");
  }
  if (cfg.fir_taps < 1 || cfg.fir_taps % 2 == 0) {
    throw ConfigError("preprocess: fir_taps must be odd");
  }
}

ComplexSignal mix_to_baseband(const ComplexSignal& x, double carrier_hz) {
  if (carrier_hz >= x.sample_rate / 2.0) {
    throw std::invalid_argument("mix_to_baseband: carrier must lie below f_s / 2");
  }
  ComplexSignal y = x;
  if (carrier_hz == 0.0) return y;
  const double w = 2.0 * std::numbers::pi * carrier_hz / x.sample_rate;
  for (std::size_t n = 0; n < y.samples.size(); ++n) {
    y.samples[n] *= std::polar(1.0, -w * static_cast<double>(n));
  }
  return y;
}

std::vector<double> design_lowpass(int taps, double cutoff) {
  if (taps < 1 || taps % 2 == 0) throw std::invalid_argument("design_lowpass: taps must be odd");
  if (!(cutoff > 0.0 && cutoff <= 0.5)) {
    throw std::invalid_argument("design_lowpass: cutoff must lie in (0, 0.5]");
  }
  const int mid = taps / 2;
  std::vector<double> h(static_cast<std::size_t>(taps));
  double sum = 0.0;
  for (int n = 0; n < taps; ++n) {
    const int k = n - mid;
    const double ideal = k == 0 ? 2.0 * cutoff
                                : std::sin(2.0 * std::numbers::pi * cutoff * k) / (std::numbers::pi * k);
    const double window =
        taps == 1 ? 1.0 : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (taps - 1));
    h[static_cast<std::size_t>(n)] = ideal * window;
    sum += h[static_cast<std::size_t>(n)];
  }
  for (auto& v : h) v /= sum;
  return h;
}

ComplexSignal fir_filter(const ComplexSignal& x, std::span<const double> taps) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const auto t = static_cast<std::ptrdiff_t>(taps.size());
  const std::ptrdiff_t mid = t / 2;
  ComplexSignal y;
  y.sample_rate = x.sample_rate;
  y.samples.assign(x.size(), {0.0, 0.0});
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    signal::Complex acc{0.0, 0.0};
    for (std::ptrdiff_t k = 0; k < t; ++k) {
      const std::ptrdiff_t j = i + mid - k;
      if (j < 0 || j >= n) continue;
      acc += taps[static_cast<std::size_t>(k)] * x.samples[static_cast<std::size_t>(j)];
    }
    y.samples[static_cast<std::size_t>(i)] = acc;
  }
  return y;
}

double decimation_factor(double sample_rate_hz, double bandwidth_hz) {
  const double cutoff = bandwidth_hz / 2.0;
  return sample_rate_hz / (2.0 * cutoff);
}

DecimationResult lowpass_decimate(const ComplexSignal& x, double bandwidth_hz, int taps) {
  DecimationResult out;
  out.exact_factor = decimation_factor(x.sample_rate, bandwidth_hz);
  if (out.exact_factor < 1.0) {
    out.signal = x;
    out.passthrough = true;
    return out;
  }
  // Integer decimation; the small epsilon keeps 5.0000000001 from flooring to 4.
  out.factor = static_cast<std::size_t>(std::floor(out.exact_factor + 1e-9));
  const double cutoff = (bandwidth_hz / 2.0) / x.sample_rate;
  const auto h = design_lowpass(taps, std::min(cutoff, 0.5));
  const ComplexSignal filtered = fir_filter(x, h);
  if (out.factor == 1) {
    out.signal = filtered;
    return out;
  }
  out.signal.sample_rate = x.sample_rate / static_cast<double>(out.factor);
  out.signal.samples.reserve(filtered.size() / out.factor + 1);
  for (std::size_t i = 0; i < filtered.size(); i += out.factor) {
    out.signal.samples.push_back(filtered.samples[i]);
  }
  return out;
}

std::vector<double> interleave_iq(const ComplexSignal& x) {
  std::vector<double> v;
  v.reserve(2 * x.size());
  for (const auto& s : x.samples) {
    v.push_back(s.real());
    v.push_back(s.imag());
  }
  return v;
}

void standardize(std::span<double> frame) {
  if (frame.empty()) return;
  const double n = static_cast<double>(frame.size());
  double mean = 0.0;
  for (double v : frame) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : frame) var += (v - mean) * (v - mean);
  var /= n;
  const double sd = std::sqrt(var);
  if (sd < kStdFloor) {
    std::fill(frame.begin(), frame.end(), 0.0);
    return;
  }
  for (double& v : frame) v = (v - mean) / sd;
}

std::size_t hop_length(const PreprocessConfig& cfg) {
  // Keep the hop even so frames never split an I/Q pair.
  const double raw = static_cast<double>(cfg.frame_width) * (1.0 - cfg.overlap_fraction);
  const auto pairs = static_cast<std::size_t>(std::llround(raw / 2.0));
  return std::max<std::size_t>(2, 2 * pairs);
}

std::size_t frame_count(std::size_t length, const PreprocessConfig& cfg) {
  if (length < cfg.frame_width) return 0;
  return 1 + (length - cfg.frame_width) / hop_length(cfg);
}

FramingResult frame_and_standardize(std::span<const double> v, const PreprocessConfig& cfg,
                                    const FrameTag& tag) {
  FramingResult out;
  const std::size_t count = frame_count(v.size(), cfg);
  if (count == 0) {
    out.too_short = true;
    return out;
  }
  const std::size_t hop = hop_length(cfg);

  std::vector<double> global;
  std::span<const double> source = v;
  if (!cfg.per_frame_standardization) {
    global.assign(v.begin(), v.end());
    standardize(global);
    source = global;
  }

  out.frames.reserve(count);
  for (std::size_t f = 0; f < count; ++f) {
    Frame frame;
    const auto first = source.begin() + static_cast<std::ptrdiff_t>(f * hop);
    frame.values.assign(first, first + static_cast<std::ptrdiff_t>(cfg.frame_width));
    if (cfg.per_frame_standardization) standardize(frame.values);
    frame.class_label = tag.class_label;
    frame.task_id = tag.task_id;
    frame.snr_db = tag.snr_db;
    out.frames.push_back(std::move(frame));
  }
  return out;
}

std::vector<Frame> preprocess(const signal::LabeledWaveform& w, const PreprocessConfig& cfg) {
  const ComplexSignal base = mix_to_baseband(w.signal, cfg.carrier_hz);
  const DecimationResult dec = lowpass_decimate(base, cfg.bandwidth_hz, cfg.fir_taps);
  const auto iq = interleave_iq(dec.signal);
  auto framed = frame_and_standardize(iq, cfg, {w.class_label, w.task_id, w.snr_db});
  return std::move(framed.frames);
}

std::size_t predicted_frames(std::size_t n_samples, const PreprocessConfig& cfg) {
  const double exact = decimation_factor(cfg.sample_rate_hz, cfg.bandwidth_hz);
  std::size_t decimated = n_samples;
  if (exact >= 1.0) {
    const auto m = static_cast<std::size_t>(std::floor(exact + 1e-9));
    decimated = (n_samples + m - 1) / m;
  }
  return frame_count(2 * decimated, cfg);
}

}  // namespace elc::prep
