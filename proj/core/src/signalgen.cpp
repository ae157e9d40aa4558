#include "elc/signalgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "elc/error.hpp"

namespace elc::signal {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct SchemeName {
  Scheme scheme;
  std::string_view name;
  Family family;
};

constexpr std::array<SchemeName, 10> kSchemes{{
    {Scheme::kCoherentPulseTrain, "CoherentPulseTrain", Family::kRadCharLike},
    {Scheme::kBarker, "Barker", Family::kRadCharLike},
    {Scheme::kPolyphaseBarker, "PolyphaseBarker", Family::kRadCharLike},
    {Scheme::kFrank, "Frank", Family::kRadCharLike},
    {Scheme::kLfm, "LFM", Family::kRadCharLike},
    {Scheme::kP0NUnmod, "P0N_unmod", Family::kRadNistLike},
    {Scheme::kQ3NBarker, "Q3N_Barker", Family::kRadNistLike},
    {Scheme::kQ3NFrank, "Q3N_Frank", Family::kRadNistLike},
    {Scheme::kQ3NZadoffChu, "Q3N_ZadoffChu", Family::kRadNistLike},
    {Scheme::kQ3NChirp, "Q3N_Chirp", Family::kRadNistLike},
}};

const SchemeName& lookup(Scheme s) {
  for (const auto& e : kSchemes) {
    if (e.scheme == s) return e;
  }
  throw std::invalid_argument("unknown scheme");
}

// Phase of the intra-pulse modulation at time tau since the leading edge.
double intra_pulse_phase(const PulseSpec& spec, const std::vector<double>& chips, double tau) {
  const double pw = spec.pulse_width;
  switch (spec.scheme) {
    case Scheme::kCoherentPulseTrain:
    case Scheme::kP0NUnmod:
      return 0.0;
    case Scheme::kLfm: {
      const double b = spec.bandwidth;
      return std::numbers::pi * (b / pw) * tau * tau - std::numbers::pi * b * tau;
    }
    case Scheme::kQ3NChirp: {
      // Triangular FM: up-sweep over the first half, down-sweep over the second.
      const double b = spec.bandwidth;
      const double half = 0.5 * pw;
      if (tau < half) return kTwoPi * (-0.5 * b * tau + b * tau * tau / pw);
      const double t2 = tau - half;
      return kTwoPi * (0.5 * b * t2 - b * t2 * t2 / pw);
    }
    default: {
      const auto n = chips.size();
      auto idx = static_cast<std::size_t>(std::floor(tau / pw * static_cast<double>(n)));
      idx = std::min(idx, n - 1);
      return chips[idx];
    }
  }
}

std::vector<double> chip_table(const PulseSpec& spec) {
  switch (spec.scheme) {
    case Scheme::kBarker:
    case Scheme::kQ3NBarker:
      return barker_phases(spec.code_length);
    case Scheme::kPolyphaseBarker:
      return polyphase_barker_phases();
    case Scheme::kFrank:
    case Scheme::kQ3NFrank:
      return frank_phases(spec.code_length);
    case Scheme::kQ3NZadoffChu:
      return zadoff_chu_phases(spec.code_length);
    default:
      return {};
  }
}

// First and one-past-last sample index of pulse k.
std::pair<std::size_t, std::size_t> pulse_extent(const PulseSpec& spec, int k) {
  const double t0 = spec.start_delay + k * spec.pri;
  const auto first = static_cast<std::size_t>(std::ceil(t0 * spec.sample_rate - 1e-9));
  const auto last =
      static_cast<std::size_t>(std::ceil((t0 + spec.pulse_width) * spec.sample_rate - 1e-9));
  return {first, last};
}

}  // namespace

std::string_view to_string(Family f) {
  return f == Family::kRadCharLike ? "RadCharLike" : "RadNistLike";
}

std::string_view to_string(Scheme s) { return lookup(s).name; }

Family family_from_string(std::string_view name) {
  if (name == "RadCharLike") return Family::kRadCharLike;
  if (name == "RadNistLike") return Family::kRadNistLike;
  throw ConfigError("unknown pulse family '" + std::string(name) + "'");
}

Scheme scheme_from_string(std::string_view name) {
  for (const auto& e : kSchemes) {
    if (e.name == name) return e.scheme;
  }
  throw ConfigError("unknown modulation scheme '" + std::string(name) + "'");
}

bool scheme_in_family(Scheme s, Family f) { return lookup(s).family == f; }

void validate(const PulseSpec& spec) {
  if (!scheme_in_family(spec.scheme, spec.family)) {
    throw ConfigError("scheme " + std::string(to_string(spec.scheme)) +
                      " is not part of family " + std::string(to_string(spec.family)));
  }
  if (!(spec.pulse_width > 0.0)) throw ConfigError("pulse_width must be positive");
  if (spec.pri < spec.pulse_width) throw ConfigError("pri must be >= pulse_width");
  if (spec.pulses_per_burst < 1) throw ConfigError("pulses_per_burst must be >= 1");
  if (!(spec.bandwidth > 0.0)) throw ConfigError("bandwidth must be positive");
  if (spec.sample_rate < 2.0 * spec.bandwidth) {
    throw ConfigError("sample_rate must be at least twice the bandwidth");
  }
  if (spec.start_delay < 0.0) throw ConfigError("start_delay must be non-negative");
}

std::vector<double> barker_phases(int length) {
  std::string_view code;
  switch (length) {
    case 2: code = "+-"; break;
    case 3: code = "++-"; break;
    case 4: code = "++-+"; break;
    case 5: code = "+++-+"; break;
    case 7: code = "+++--+-"; break;
    case 11: code = "+++---+--+-"; break;
    case 13: code = "+++++--++-+-+"; break;
    default:
      throw ConfigError("no Barker code of length " + std::to_string(length));
  }
  std::vector<double> phases;
  phases.reserve(code.size());
  for (char c : code) phases.push_back(c == '+' ? 0.0 : std::numbers::pi);
  return phases;
}

std::vector<double> polyphase_barker_phases() {
  // Length-11 sequence over a 32-phase alphabet; every aperiodic
  // autocorrelation sidelobe has magnitude <= 1.
  constexpr std::array<int, 11> kSteps{0, 27, 22, 26, 28, 8, 8, 26, 10, 21, 5};
  std::vector<double> phases;
  phases.reserve(kSteps.size());
  for (int s : kSteps) phases.push_back(kTwoPi * s / 32.0);
  return phases;
}

std::vector<double> frank_phases(int order) {
  if (order < 2) throw ConfigError("Frank code order must be >= 2");
  std::vector<double> phases;
  phases.reserve(static_cast<std::size_t>(order * order));
  for (int i = 0; i < order; ++i) {
    for (int k = 0; k < order; ++k) {
      phases.push_back(kTwoPi * std::fmod(static_cast<double>(i * k), order) / order);
    }
  }
  return phases;
}

std::vector<double> zadoff_chu_phases(int length) {
  if (length < 2 || length % 2 == 0) {
    throw ConfigError("Zadoff-Chu length must be odd and >= 3");
  }
  std::vector<double> phases;
  phases.reserve(static_cast<std::size_t>(length));
  for (int n = 0; n < length; ++n) {
    phases.push_back(-std::numbers::pi * n * (n + 1) / length);
  }
  return phases;
}

std::size_t window_length(const PulseSpec& spec) {
  if (spec.window_samples > 0) return spec.window_samples;
  return pulse_extent(spec, spec.pulses_per_burst - 1).second;
}

std::vector<bool> on_pulse_mask(const PulseSpec& spec) {
  const std::size_t n = window_length(spec);
  std::vector<bool> mask(n, false);
  for (int k = 0; k < spec.pulses_per_burst; ++k) {
    auto [first, last] = pulse_extent(spec, k);
    for (std::size_t i = first; i < std::min(last, n); ++i) mask[i] = true;
  }
  return mask;
}

ComplexSignal generate_pulse(const PulseSpec& spec, std::uint64_t seed) {
  validate(spec);
  ComplexSignal out;
  out.sample_rate = spec.sample_rate;
  out.samples.assign(window_length(spec), Complex{0.0, 0.0});

  double phase0 = 0.0;
  if (spec.random_phase) {
    Rng rng(derive_seed(seed, {0x9a5e}));
    phase0 = kTwoPi * uniform01(rng);
  }

  const auto chips = chip_table(spec);
  const double fs = spec.sample_rate;
  const std::size_t n = out.samples.size();
  for (int k = 0; k < spec.pulses_per_burst; ++k) {
    const double t0 = spec.start_delay + k * spec.pri;
    auto [first, last] = pulse_extent(spec, k);
    for (std::size_t i = first; i < std::min(last, n); ++i) {
      const double t = static_cast<double>(i) / fs;
      const double tau = std::max(0.0, t - t0);
      // Carrier phase runs on absolute time so the train stays coherent.
      const double phase = kTwoPi * spec.carrier_offset * t + phase0 + intra_pulse_phase(spec, chips, tau);
      out.samples[i] = std::polar(1.0, phase);
    }
  }
  return out;
}

double mean_power(const ComplexSignal& signal) {
  if (signal.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& s : signal.samples) acc += std::norm(s);
  return acc / static_cast<double>(signal.size());
}

ComplexSignal add_awgn(const ComplexSignal& signal, double snr_db, std::uint64_t seed) {
  if (signal.empty()) throw DataError("add_awgn: empty signal");
  const double p = mean_power(signal);
  if (!(p > 0.0)) throw DataError("add_awgn: zero-power input");
  if (std::isinf(snr_db) && snr_db > 0) return signal;

  const double noise_power = p / std::pow(10.0, snr_db / 10.0);
  const double sigma = std::sqrt(noise_power / 2.0);
  Rng rng(seed);
  ComplexSignal out = signal;
  for (auto& s : out.samples) {
    const double re = standard_normal(rng);
    const double im = standard_normal(rng);
    s += Complex{sigma * re, sigma * im};
  }
  return out;
}

std::vector<double> SnrGrid::values() const {
  if (!(step_db > 0.0) || max_db < min_db) throw ConfigError("invalid SNR grid");
  const double span = (max_db - min_db) / step_db;
  const double rounded = std::round(span);
  if (std::abs(span - rounded) > 1e-9) throw ConfigError("SNR step must divide the SNR range");
  std::vector<double> out;
  for (int i = 0; i <= static_cast<int>(rounded); ++i) out.push_back(min_db + i * step_db);
  return out;
}

namespace {

double draw(const Range<double>& r, Rng& rng) {
  if (r.max <= r.min) return r.min;
  return r.min + (r.max - r.min) * uniform01(rng);
}

int draw(const Range<int>& r, Rng& rng) {
  if (r.max <= r.min) return r.min;
  return r.min + static_cast<int>(rng() % static_cast<std::uint64_t>(r.max - r.min + 1));
}

}  // namespace

PulseSpec sample_spec(const PulseDistribution& dist, Rng& rng) {
  PulseSpec spec = dist.base;
  spec.pulse_width = draw(dist.pulse_width, rng);
  spec.pri = std::max(draw(dist.pri, rng), spec.pulse_width);
  spec.pulses_per_burst = draw(dist.pulses_per_burst, rng);
  spec.start_delay = draw(dist.start_delay, rng);
  spec.random_phase = dist.random_phase;
  return spec;
}

std::vector<LabeledWaveform> build_dataset(const std::vector<ClassSpec>& classes,
                                           std::size_t n_per_class, const SnrGrid& snr,
                                           std::uint64_t seed) {
  if (classes.empty()) throw ConfigError("build_dataset: empty class list");
  if (n_per_class < 1) throw ConfigError("build_dataset: n_per_class must be >= 1");
  const auto grid = snr.values();

  std::vector<LabeledWaveform> out;
  out.reserve(classes.size() * n_per_class);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const auto& cls = classes[c];
    const auto class_tag = static_cast<std::uint64_t>(c);
    for (std::size_t i = 0; i < n_per_class; ++i) {
      Rng rng = make_rng(seed, {class_tag, i, 0});
      const PulseSpec spec = sample_spec(cls.distribution, rng);
      const double snr_db = grid[rng() % grid.size()];
      // Phase draws are per-sample only when jitter is enabled; otherwise all
      // members of a class share the clean waveform.
      const std::uint64_t pulse_seed =
          spec.random_phase ? derive_seed(seed, {class_tag, i, 1}) : derive_seed(seed, {class_tag});
      LabeledWaveform w;
      w.signal = add_awgn(generate_pulse(spec, pulse_seed), snr_db, derive_seed(seed, {class_tag, i, 2}));
      w.class_label = cls.class_label;
      w.task_id = cls.task_id;
      w.snr_db = snr_db;
      w.seed = pulse_seed;
      out.push_back(std::move(w));
    }
  }
  return out;
}

std::vector<PulseDistribution> default_family(Family family) {
  std::vector<PulseDistribution> out;
  if (family == Family::kRadCharLike) {
    PulseSpec base;
    base.family = family;
    base.sample_rate = 3.2e6;
    base.carrier_offset = 0.4e6;
    base.bandwidth = 1.0e6;
    base.window_samples = 1536;  // 512 complex samples after decimation by 3
    const std::array<std::pair<Scheme, int>, 5> schemes{{{Scheme::kCoherentPulseTrain, 0},
                                                          {Scheme::kBarker, 13},
                                                          {Scheme::kPolyphaseBarker, 11},
                                                          {Scheme::kFrank, 4},
                                                          {Scheme::kLfm, 0}}};
    for (auto [scheme, code] : schemes) {
      PulseDistribution d;
      d.base = base;
      d.base.scheme = scheme;
      d.base.code_length = code;
      d.pulse_width = {20e-6, 40e-6};
      d.pri = {80e-6, 160e-6};
      d.pulses_per_burst = {2, 4};
      d.start_delay = {0.0, 40e-6};
      d.random_phase = true;
      out.push_back(d);
    }
  } else {
    PulseSpec base;
    base.family = family;
    base.sample_rate = 10e6;
    base.carrier_offset = 1.5e6;
    base.bandwidth = 2.5e6;
    base.window_samples = 3072;  // 768 complex samples after decimation by 4
    const std::array<std::pair<Scheme, int>, 5> schemes{{{Scheme::kP0NUnmod, 0},
                                                          {Scheme::kQ3NBarker, 7},
                                                          {Scheme::kQ3NFrank, 3},
                                                          {Scheme::kQ3NZadoffChu, 13},
                                                          {Scheme::kQ3NChirp, 0}}};
    for (auto [scheme, code] : schemes) {
      PulseDistribution d;
      d.base = base;
      d.base.scheme = scheme;
      d.base.code_length = code;
      d.base.bandwidth = scheme == Scheme::kQ3NChirp ? 2.0e6 : 2.5e6;
      d.pulse_width = {8e-6, 16e-6};
      d.pri = {30e-6, 60e-6};
      d.pulses_per_burst = {3, 8};
      d.start_delay = {0.0, 20e-6};
      d.random_phase = true;
      out.push_back(d);
    }
  }
  return out;
}

}  // namespace elc::signal
