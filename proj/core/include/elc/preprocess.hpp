#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "elc/signalgen.hpp"

namespace elc::prep {

using signal::ComplexSignal;

struct PreprocessConfig {
  double carrier_hz = 0.0;
  double sample_rate_hz = 1.0;
  double bandwidth_hz = 1.0;
  std::size_t frame_width = 1024;  // real values, interleaved I/Q
  double overlap_fraction = 0.0;
  int fir_taps = 127;
  bool per_frame_standardization = true;
};

void validate(const PreprocessConfig& cfg);

struct Frame {
  std::vector<double> values;
  int class_label = 0;
  int task_id = 0;
  double snr_db = 0.0;
};

// Down-conversion: x[n] * exp(-j 2 pi f_c n / f_s).
ComplexSignal mix_to_baseband(const ComplexSignal& x, double carrier_hz);

// Windowed-sinc low-pass with a Hamming window. cutoff is normalised to the
// sample rate (0 < cutoff < 0.5). Taps sum to exactly one.
std::vector<double> design_lowpass(int taps, double cutoff);

// Zero-phase application of an odd-length FIR (delay compensated, zero padded
// at the edges). Output length equals input length.
ComplexSignal fir_filter(const ComplexSignal& x, std::span<const double> taps);

struct DecimationResult {
  ComplexSignal signal;
  std::size_t factor = 1;
  double exact_factor = 1.0;  // f_s / (2 f_cutoff) before truncation
  bool passthrough = false;   // exact factor < 1: nothing could be decimated
};

double decimation_factor(double sample_rate_hz, double bandwidth_hz);

DecimationResult lowpass_decimate(const ComplexSignal& x, double bandwidth_hz, int taps = 127);

std::vector<double> interleave_iq(const ComplexSignal& x);

struct FrameTag {
  int class_label = 0;
  int task_id = 0;
  double snr_db = 0.0;
};

struct FramingResult {
  std::vector<Frame> frames;
  bool too_short = false;
};

std::size_t hop_length(const PreprocessConfig& cfg);
std::size_t frame_count(std::size_t length, const PreprocessConfig& cfg);

FramingResult frame_and_standardize(std::span<const double> v, const PreprocessConfig& cfg,
                                    const FrameTag& tag = {});

// Zero mean / unit variance in place; frames with std below 1e-12 become zeros.
void standardize(std::span<double> frame);

// Full chain: mix, filter and decimate, interleave, frame.
std::vector<Frame> preprocess(const signal::LabeledWaveform& w, const PreprocessConfig& cfg);

// Number of frames the chain yields for a window of n complex samples.
std::size_t predicted_frames(std::size_t n_samples, const PreprocessConfig& cfg);

}  // namespace elc::prep
