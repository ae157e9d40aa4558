#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "elc/config.hpp"
#include "elc/dataio.hpp"
#include "elc/nn/tensor.hpp"
#include "elc/preprocess.hpp"
#include "elc/signalgen.hpp"

// Builds the frame datasets an experiment trains and evaluates on.
namespace elc::data {

// Task t owns five consecutive global labels in the configured task order.
std::vector<signal::ClassSpec> class_specs(const DataConfig& cfg);
io::DatasetInfo dataset_info(const DataConfig& cfg, std::uint64_t seed);
prep::PreprocessConfig preprocess_config(const DataConfig& cfg, signal::Family family);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Stratified by (class, SNR bin): within every stratum a seeded shuffle sends
// round(test_fraction * n) members to the test side.
Split stratified_split(std::span<const signal::LabeledWaveform> waves, double test_fraction, double snr_bin_db,
                       std::uint64_t seed);

struct GeneratedData {
  io::FrameDataset train;
  io::FrameDataset test;
  std::vector<signal::LabeledWaveform> waveforms;  // only when requested
};

// Splitting happens per waveform, before framing, so overlapping frames of
// one waveform never straddle train and test.
GeneratedData generate(const ExperimentConfig& cfg, bool keep_waveforms = false);

// <dir>/train, <dir>/test and optionally <dir>/waveforms.
void write(const std::filesystem::path& dir, const GeneratedData& data);
GeneratedData read(const std::filesystem::path& dir);

// Stacks the selected frames into a row-major batch.
nn::Matrix stack(const io::FrameDataset& ds, std::span<const std::size_t> rows);
nn::Matrix stack(const io::FrameDataset& ds);

}  // namespace elc::data
