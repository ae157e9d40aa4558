#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "elc/rng.hpp"

namespace elc::signal {

using Complex = std::complex<double>;

enum class Family { kRadCharLike, kRadNistLike };

// RadChar-like schemes come first, RadNIST-like schemes after. A scheme is
// only valid inside its own family.
enum class Scheme {
  kCoherentPulseTrain,
  kBarker,
  kPolyphaseBarker,
  kFrank,
  kLfm,
  kP0NUnmod,
  kQ3NBarker,
  kQ3NFrank,
  kQ3NZadoffChu,
  kQ3NChirp,
};

std::string_view to_string(Family f);
std::string_view to_string(Scheme s);
Family family_from_string(std::string_view name);
Scheme scheme_from_string(std::string_view name);
bool scheme_in_family(Scheme s, Family f);

struct PulseSpec {
  Family family = Family::kRadCharLike;
  Scheme scheme = Scheme::kCoherentPulseTrain;
  double pulse_width = 10e-6;   // s
  double pri = 40e-6;           // s
  int pulses_per_burst = 1;
  double bandwidth = 1e6;       // Hz, LFM sweep / nominal occupied band
  double sample_rate = 3.2e6;   // Hz
  double carrier_offset = 0.0;  // Hz
  // Code length: Barker length (2,3,4,5,7,11,13), Frank order N (N*N chips),
  // Zadoff-Chu length. Ignored by unmodulated and chirp schemes.
  int code_length = 13;
  double start_delay = 0.0;     // s, leading edge of the first pulse
  std::size_t window_samples = 0;  // 0: exactly one burst
  bool random_phase = false;    // draw the initial carrier phase from the seed
};

void validate(const PulseSpec& spec);

struct ComplexSignal {
  std::vector<Complex> samples;
  double sample_rate = 1.0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

struct LabeledWaveform {
  ComplexSignal signal;
  int class_label = 0;
  double snr_db = 0.0;
  int task_id = 0;
  std::uint64_t seed = 0;
};

// Chip phase tables (radians). Exposed for tests and benchmarks.
std::vector<double> barker_phases(int length);
std::vector<double> polyphase_barker_phases();
std::vector<double> frank_phases(int order);
std::vector<double> zadoff_chu_phases(int length);

// Boolean on-pulse indicator for every sample of the generated window.
std::vector<bool> on_pulse_mask(const PulseSpec& spec);

std::size_t window_length(const PulseSpec& spec);

ComplexSignal generate_pulse(const PulseSpec& spec, std::uint64_t seed);

// snr_db == +inf is the no-noise sentinel.
inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

ComplexSignal add_awgn(const ComplexSignal& signal, double snr_db, std::uint64_t seed);

double mean_power(const ComplexSignal& signal);

// Uniform jitter range; min == max disables jitter.
template <typename T>
struct Range {
  T min{};
  T max{};
};

struct PulseDistribution {
  PulseSpec base;
  Range<double> pulse_width{10e-6, 10e-6};
  Range<double> pri{40e-6, 40e-6};
  Range<int> pulses_per_burst{1, 1};
  Range<double> start_delay{0.0, 0.0};
  bool random_phase = false;
};

struct ClassSpec {
  PulseDistribution distribution;
  int class_label = 0;
  int task_id = 0;
};

struct SnrGrid {
  double min_db = -20.0;
  double max_db = 18.0;
  double step_db = 2.0;

  std::vector<double> values() const;
};

// Draws one concrete PulseSpec from the distribution.
PulseSpec sample_spec(const PulseDistribution& dist, Rng& rng);

std::vector<LabeledWaveform> build_dataset(const std::vector<ClassSpec>& classes,
                                           std::size_t n_per_class, const SnrGrid& snr,
                                           std::uint64_t seed);

// Desk-scale defaults for the two synthetic families: five classes each.
std::vector<PulseDistribution> default_family(Family family);

}  // namespace elc::signal
