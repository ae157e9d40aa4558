#include "elc/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "elc/error.hpp"
#include "elc/rng.hpp"

namespace elc::data {

std::vector<signal::ClassSpec> class_specs(const DataConfig& cfg) {
  std::vector<signal::ClassSpec> out;
  int label = 0;
  for (std::size_t t = 0; t < cfg.tasks.size(); ++t) {
    for (const auto& dist : signal::default_family(cfg.tasks[t].family)) {
      out.push_back({dist, label++, static_cast<int>(t)});
    }
  }
  return out;
}

io::DatasetInfo dataset_info(const DataConfig& cfg, std::uint64_t seed) {
  io::DatasetInfo info;
  info.snr = cfg.snr;
  info.seed = seed;
  for (const auto& c : class_specs(cfg)) {
    info.classes.push_back({c.class_label, c.task_id, std::string(signal::to_string(c.distribution.base.scheme))});
  }
  for (std::size_t t = 0; t < cfg.tasks.size(); ++t) {
    io::TaskInfo ti{static_cast<int>(t), cfg.tasks[t].name, {}};
    for (const auto& c : info.classes) {
      if (c.task_id == static_cast<int>(t)) ti.classes.push_back(c.label);
    }
    info.tasks.push_back(ti);
  }
  return info;
}

prep::PreprocessConfig preprocess_config(const DataConfig& cfg, signal::Family family) {
  const auto dists = signal::default_family(family);
  prep::PreprocessConfig p;
  p.carrier_hz = dists.front().base.carrier_offset;
  p.sample_rate_hz = dists.front().base.sample_rate;
  p.bandwidth_hz = 0.0;
  for (const auto& d : dists) p.bandwidth_hz = std::max(p.bandwidth_hz, d.base.bandwidth);
  p.frame_width = cfg.frame_width;
  p.overlap_fraction = cfg.overlap_fraction;
  p.fir_taps = cfg.fir_taps;
  prep::validate(p);
  return p;
}

Split stratified_split(std::span<const signal::LabeledWaveform> waves, double test_fraction, double snr_bin_db,
                       std::uint64_t seed) {
  std::map<std::pair<int, long long>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < waves.size(); ++i) {
    const auto bin = static_cast<long long>(std::floor(waves[i].snr_db / snr_bin_db + 1e-9));
    strata[{waves[i].class_label, bin}].push_back(i);
  }
  Split s;
  for (auto& [key, members] : strata) {
    Rng rng = make_rng(seed, {0x73706c, static_cast<std::uint64_t>(key.first),
                              static_cast<std::uint64_t>(key.second + (1LL << 32))});
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(members.size())));
    for (std::size_t k = 0; k < members.size(); ++k) (k < n_test ? s.test : s.train).push_back(members[k]);
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

GeneratedData generate(const ExperimentConfig& cfg, bool keep_waveforms) {
  cfg.validate();
  const auto classes = class_specs(cfg.data);
  auto waves = signal::build_dataset(classes, cfg.data.waveforms_per_class, cfg.data.snr, cfg.seed);
  const Split split = stratified_split(waves, cfg.data.test_fraction, cfg.data.snr.step_db, cfg.seed);

  std::vector<prep::PreprocessConfig> prep_cfg;
  for (const auto& t : cfg.data.tasks) prep_cfg.push_back(preprocess_config(cfg.data, t.family));

  GeneratedData out;
  for (auto* ds : {&out.train, &out.test}) {
    ds->width = cfg.data.frame_width;
    ds->info = dataset_info(cfg.data, cfg.seed);
  }
  const auto append = [&](io::FrameDataset& ds, std::span<const std::size_t> idx) {
    for (std::size_t i : idx) {
      const auto& w = waves[i];
      auto frames = prep::preprocess(w, prep_cfg.at(static_cast<std::size_t>(w.task_id)));
      if (frames.empty()) throw DataError("waveform too short for one frame");
      for (auto& f : frames) ds.frames.push_back(std::move(f));
    }
  };
  append(out.train, split.train);
  append(out.test, split.test);
  // Saved datasets hold f32 values; training in memory sees the same numbers.
  io::quantize_to_f32(out.train);
  io::quantize_to_f32(out.test);
  if (keep_waveforms) out.waveforms = std::move(waves);
  return out;
}

void write(const std::filesystem::path& dir, const GeneratedData& data) {
  std::filesystem::create_directories(dir);
  io::write_frame_dataset(dir / "train", data.train);
  io::write_frame_dataset(dir / "test", data.test);
  if (!data.waveforms.empty()) io::write_waveform_dataset(dir / "waveforms", data.waveforms, data.train.info);
}

GeneratedData read(const std::filesystem::path& dir) {
  GeneratedData out;
  out.train = io::read_frame_dataset(dir / "train");
  out.test = io::read_frame_dataset(dir / "test");
  return out;
}

nn::Matrix stack(const io::FrameDataset& ds, std::span<const std::size_t> rows) {
  nn::Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(ds.width));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& v = ds.frames.at(rows[r]).values;
    if (v.size() != ds.width) throw DataError("frame width mismatch");
    m.row(static_cast<Eigen::Index>(r)) = Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  return m;
}

nn::Matrix stack(const io::FrameDataset& ds) {
  std::vector<std::size_t> rows(ds.frames.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return stack(ds, rows);
}

}  // namespace elc::data
