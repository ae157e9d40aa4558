#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "elc/preprocess.hpp"
#include "elc/signalgen.hpp"

namespace elc::io {

namespace fs = std::filesystem;

struct ClassInfo {
  int label = 0;
  int task_id = 0;
  std::string name;
};

struct TaskInfo {
  int task_id = 0;
  std::string name;
  std::vector<int> classes;  // global labels, ascending
};

// Shared metadata persisted in every dataset manifest.
struct DatasetInfo {
  std::vector<ClassInfo> classes;
  std::vector<TaskInfo> tasks;
  signal::SnrGrid snr;
  std::uint64_t seed = 0;
};

// Single waveform file: "SIG1", u32 sample count, f32 interleaved I/Q (LE).
void write_signal(const fs::path& file, const signal::ComplexSignal& s);
signal::ComplexSignal read_signal(const fs::path& file, double sample_rate);

// Directory layout: manifest.json plus wf_NNNNNN.sig per waveform.
void write_waveform_dataset(const fs::path& dir, const std::vector<signal::LabeledWaveform>& waves,
                            const DatasetInfo& info);
std::vector<signal::LabeledWaveform> read_waveform_dataset(const fs::path& dir, DatasetInfo* info = nullptr);

struct FrameDataset {
  std::size_t width = 1024;
  std::vector<prep::Frame> frames;
  DatasetInfo info;
};

// Directory layout: manifest.json, frames.bin ("FRM1", u32 rows, u32 width,
// f32 row-major), labels.csv (frame_index,class,task,snr_db).
void write_frame_dataset(const fs::path& dir, const FrameDataset& ds);
FrameDataset read_frame_dataset(const fs::path& dir);

// Rounds every frame value through f32, matching what a saved dataset holds.
void quantize_to_f32(FrameDataset& ds);

}  // namespace elc::io
