#include "elc/dataio.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "elc/error.hpp"

namespace elc::io {

using nlohmann::json;

namespace {

constexpr char kSignalMagic[5] = "SIG1";
constexpr char kFrameMagic[5] = "FRM1";

json info_to_json(const DatasetInfo& info) {
  json j;
  j["seed"] = info.seed;
  j["snr_grid"] = {{"min_db", info.snr.min_db}, {"max_db", info.snr.max_db}, {"step_db", info.snr.step_db}};
  j["classes"] = json::array();
  for (const auto& c : info.classes) {
    j["classes"].push_back({{"label", c.label}, {"task", c.task_id}, {"name", c.name}});
  }
  j["tasks"] = json::array();
  for (const auto& t : info.tasks) {
    j["tasks"].push_back({{"task", t.task_id}, {"name", t.name}, {"classes", t.classes}});
  }
  return j;
}

DatasetInfo info_from_json(const json& j) {
  DatasetInfo info;
  info.seed = j.at("seed").get<std::uint64_t>();
  const auto& g = j.at("snr_grid");
  info.snr = {g.at("min_db").get<double>(), g.at("max_db").get<double>(), g.at("step_db").get<double>()};
  for (const auto& c : j.at("classes")) {
    info.classes.push_back({c.at("label").get<int>(), c.at("task").get<int>(), c.at("name").get<std::string>()});
  }
  for (const auto& t : j.at("tasks")) {
    info.tasks.push_back({t.at("task").get<int>(), t.at("name").get<std::string>(),
                          t.at("classes").get<std::vector<int>>()});
  }
  return info;
}

json read_json(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw DataError("cannot open " + file.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + file.string() + ": " + e.what());
  }
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw DataError("cannot write " + file.string());
  os << text;
}

std::string waveform_file_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "wf_%06zu.sig", i);
  return buf;
}

}  // namespace

void write_signal(const fs::path& file, const signal::ComplexSignal& s) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw DataError("cannot write " + file.string());
  os.write(kSignalMagic, 4);
  detail::put_u32(os, static_cast<std::uint32_t>(s.size()));
  for (const auto& c : s.samples) {
    detail::put_f32(os, static_cast<float>(c.real()));
    detail::put_f32(os, static_cast<float>(c.imag()));
  }
}

signal::ComplexSignal read_signal(const fs::path& file, double sample_rate) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw DataError("cannot open " + file.string());
  detail::expect_magic(is, kSignalMagic, "signal file");
  const std::uint32_t n = detail::get_u32(is, "signal header");
  signal::ComplexSignal s;
  s.sample_rate = sample_rate;
  s.samples.resize(n);
  for (auto& c : s.samples) {
    const float re = detail::get_f32(is, "signal samples");
    const float im = detail::get_f32(is, "signal samples");
    c = {re, im};
  }
  return s;
}

void write_waveform_dataset(const fs::path& dir, const std::vector<signal::LabeledWaveform>& waves,
                            const DatasetInfo& info) {
  fs::create_directories(dir);
  json manifest = info_to_json(info);
  manifest["format"] = "elc-waveforms";
  manifest["version"] = 1;
  manifest["waveforms"] = json::array();
  for (std::size_t i = 0; i < waves.size(); ++i) {
    const auto& w = waves[i];
    const std::string name = waveform_file_name(i);
    write_signal(dir / name, w.signal);
    manifest["waveforms"].push_back({{"file", name},
                                     {"class", w.class_label},
                                     {"task", w.task_id},
                                     {"snr_db", w.snr_db},
                                     {"sample_rate", w.signal.sample_rate},
                                     {"seed", w.seed}});
  }
  write_text(dir / "manifest.json", manifest.dump(2));
}

std::vector<signal::LabeledWaveform> read_waveform_dataset(const fs::path& dir, DatasetInfo* info) {
  const json manifest = read_json(dir / "manifest.json");
  if (manifest.value("format", "") != "elc-waveforms") throw DataError("not a waveform dataset: " + dir.string());
  if (info) *info = info_from_json(manifest);
  std::vector<signal::LabeledWaveform> out;
  for (const auto& e : manifest.at("waveforms")) {
    signal::LabeledWaveform w;
    w.signal = read_signal(dir / e.at("file").get<std::string>(), e.at("sample_rate").get<double>());
    w.class_label = e.at("class").get<int>();
    w.task_id = e.at("task").get<int>();
    w.snr_db = e.at("snr_db").get<double>();
    w.seed = e.at("seed").get<std::uint64_t>();
    out.push_back(std::move(w));
  }
  return out;
}

void write_frame_dataset(const fs::path& dir, const FrameDataset& ds) {
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "frames.bin", std::ios::binary);
    if (!os) throw DataError("cannot write frames.bin in " + dir.string());
    os.write(kFrameMagic, 4);
    detail::put_u32(os, static_cast<std::uint32_t>(ds.frames.size()));
    detail::put_u32(os, static_cast<std::uint32_t>(ds.width));
    for (const auto& f : ds.frames) {
      if (f.values.size() != ds.width) throw DataError("frame width mismatch while writing dataset");
      for (double v : f.values) detail::put_f32(os, static_cast<float>(v));
    }
  }
  {
    std::ostringstream csv;
    csv.precision(17);
    csv << "frame_index,class,task,snr_db\n";
    for (std::size_t i = 0; i < ds.frames.size(); ++i) {
      const auto& f = ds.frames[i];
      csv << i << ',' << f.class_label << ',' << f.task_id << ',' << f.snr_db << '\n';
    }
    write_text(dir / "labels.csv", csv.str());
  }
  json manifest = info_to_json(ds.info);
  manifest["format"] = "elc-frames";
  manifest["version"] = 1;
  manifest["rows"] = ds.frames.size();
  manifest["width"] = ds.width;
  write_text(dir / "manifest.json", manifest.dump(2));
}

FrameDataset read_frame_dataset(const fs::path& dir) {
  const json manifest = read_json(dir / "manifest.json");
  if (manifest.value("format", "") != "elc-frames") throw DataError("not a frame dataset: " + dir.string());
  FrameDataset ds;
  ds.info = info_from_json(manifest);

  std::ifstream is(dir / "frames.bin", std::ios::binary);
  if (!is) throw DataError("cannot open frames.bin in " + dir.string());
  detail::expect_magic(is, kFrameMagic, "frames.bin");
  const std::uint32_t rows = detail::get_u32(is, "frames.bin header");
  ds.width = detail::get_u32(is, "frames.bin header");
  ds.frames.resize(rows);
  for (auto& f : ds.frames) {
    f.values.resize(ds.width);
    for (auto& v : f.values) v = detail::get_f32(is, "frames.bin payload");
  }

  std::ifstream csv(dir / "labels.csv");
  if (!csv) throw DataError("cannot open labels.csv in " + dir.string());
  std::string line;
  std::getline(csv, line);
  std::size_t seen = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::size_t index = 0;
    int cls = 0, task = 0;
    double snr = 0.0;
    char comma = 0;
    if (!(ls >> index >> comma >> cls >> comma >> task >> comma >> snr) || index >= rows) {
      throw DataError("malformed labels.csv line: " + line);
    }
    ds.frames[index].class_label = cls;
    ds.frames[index].task_id = task;
    ds.frames[index].snr_db = snr;
    ++seen;
  }
  if (seen != rows) throw DataError("labels.csv row count does not match frames.bin");
  return ds;
}

void quantize_to_f32(FrameDataset& ds) {
  for (auto& f : ds.frames) {
    for (auto& v : f.values) v = static_cast<double>(static_cast<float>(v));
  }
}

}  // namespace elc::io
