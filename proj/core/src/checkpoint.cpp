#include "elc/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "elc/error.hpp"
#include "elc/heads.hpp"

namespace elc {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'E', 'L', 'C', 'K'};
constexpr std::uint8_t kF64 = 1;
constexpr std::uint8_t kBits = 2;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_name(std::ostream& os, const std::string& name) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
}

void put_values(std::ostream& os, const std::string& name, const std::vector<double>& v) {
  put_name(os, name);
  put<std::uint8_t>(os, kF64);
  put<std::uint64_t>(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void put_mask(std::ostream& os, const std::string& name, const nn::Mask& m) {
  put_name(os, name);
  put<std::uint8_t>(os, kBits);
  put<std::uint64_t>(os, m.size());
  std::vector<std::uint8_t> packed((m.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i]) packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  }
  os.write(reinterpret_cast<const char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
}

class Reader {
 public:
  explicit Reader(std::string bytes) : buf_(std::move(bytes)) {}

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }

  std::string get_string(std::size_t n) { return std::string(take(n), n); }
  const char* take(std::size_t n) {
    if (n > buf_.size() - pos_) throw DataError("checkpoint is truncated");
    const char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  std::string buf_;
  std::size_t pos_ = 0;
};

struct Section {
  std::uint8_t type = 0;
  std::vector<double> values;
  nn::Mask mask;
};

json shapes_of(const nn::ParamList& params) {
  json out = json::array();
  for (const auto& p : params) out.push_back({{"name", p.name}, {"shape", p.values.shape}});
  return out;
}

nn::ParamList params_from(const json& table, std::map<std::string, Section>& sections, const std::string& prefix) {
  nn::ParamList out;
  for (const auto& entry : table) {
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    auto it = sections.find(prefix + name);
    if (it == sections.end() || it->second.type != kF64) throw DataError("checkpoint lacks section " + prefix + name);
    nn::Tensor t(shape);
    if (it->second.values.size() != t.size()) throw DataError("checkpoint section " + prefix + name + " has the wrong size");
    t.data = std::move(it->second.values);
    out.emplace_back(name, std::move(t));
  }
  return out;
}

nn::Mask mask_from(std::map<std::string, Section>& sections, const std::string& name, std::size_t size) {
  auto it = sections.find(name);
  if (it == sections.end() || it->second.type != kBits) throw DataError("checkpoint lacks mask " + name);
  if (it->second.mask.size() != size) throw DataError("checkpoint mask " + name + " has the wrong size");
  return std::move(it->second.mask);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  const auto& params = model.net.params();
  json manifest;
  manifest["format"] = "elc-checkpoint";
  manifest["version"] = kCheckpointVersion;
  manifest["variant"] = std::string(to_string(model.variant));
  manifest["config"] = json::parse(model.config_json);
  manifest["layers"] = shapes_of(params);
  manifest["alpha_bar"] = model.state.alpha_bar;
  manifest["nu"] = model.nu;
  manifest["mc_samples_eval"] = model.mc_samples_eval;
  manifest["eval_seed"] = model.eval_seed;
  manifest["uncertainty"] = std::string(to_string(model.uncertainty));
  manifest["task_names"] = model.task_names;
  json tasks = json::array();
  for (std::size_t t = 0; t < model.state.archive.size(); ++t) {
    const auto& part = model.state.archive[t];
    tasks.push_back({{"alpha", part.alpha},
                     {"beta", part.beta},
                     {"classes", model.head_classes.at(t)},
                     {"head", shapes_of(model.state.heads.at(t))}});
  }
  manifest["tasks"] = tasks;
  const std::string text = manifest.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : params) put_values(os, "backbone/" + p.name, p.values.data);
  for (std::size_t t = 0; t < model.state.archive.size(); ++t) {
    const auto& part = model.state.archive[t];
    const std::string ts = std::to_string(t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      put_mask(os, "mask/" + ts + "/owned/" + params[i].name, part.owned[i]);
      put_mask(os, "mask/" + ts + "/adaptive/" + params[i].name, part.adaptive[i]);
    }
    for (const auto& h : model.state.heads[t]) put_values(os, "head/" + ts + "/" + h.name, h.values.data);
  }
  if (!os) throw DataError("failed writing checkpoint " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  Reader r(std::move(bytes));
  if (std::memcmp(r.take(4), kMagic, 4) != 0) throw DataError(path.string() + " is not a checkpoint");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto mlen = r.get<std::uint64_t>();
  json manifest;
  try {
    manifest = json::parse(r.get_string(static_cast<std::size_t>(mlen)));
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint manifest: ") + e.what());
  }

  std::map<std::string, Section> sections;
  while (!r.done()) {
    const auto nlen = r.get<std::uint32_t>();
    std::string name = r.get_string(nlen);
    Section s;
    s.type = r.get<std::uint8_t>();
    const auto count = r.get<std::uint64_t>();
    if (s.type == kF64) {
      if (count > (1ull << 40)) throw DataError("checkpoint is truncated");
      s.values.resize(count);
      std::memcpy(s.values.data(), r.take(count * sizeof(double)), count * sizeof(double));
    } else if (s.type == kBits) {
      const char* p = r.take((count + 7) / 8);
      s.mask.resize(count);
      for (std::size_t i = 0; i < count; ++i) s.mask[i] = (static_cast<std::uint8_t>(p[i / 8]) >> (i % 8)) & 1u;
    } else {
      throw DataError("checkpoint section " + name + " has unknown type");
    }
    sections[std::move(name)] = std::move(s);
  }

  try {
    Model m;
    m.variant = variant_from_string(manifest.at("variant").get<std::string>());
    m.config_json = manifest.at("config").dump(2);
    const ExperimentConfig cfg = parse_config(m.config_json, path.string());
    m.net = nn::Network(cfg.model.backbone);
    nn::ParamList loaded = params_from(manifest.at("layers"), sections, "backbone/");
    auto& params = m.net.params();
    if (loaded.size() != params.size()) throw DataError("checkpoint layer table does not match the backbone");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (loaded[i].name != params[i].name || loaded[i].values.shape != params[i].values.shape) {
        throw DataError("checkpoint parameter " + loaded[i].name + " does not match the backbone");
      }
      params[i].values.data = std::move(loaded[i].values.data);
    }
    m.state = lps::make_state(params);
    m.state.alpha_bar = manifest.at("alpha_bar").get<double>();
    m.nu = manifest.at("nu").get<double>();
    m.mc_samples_eval = manifest.at("mc_samples_eval").get<std::size_t>();
    m.eval_seed = manifest.at("eval_seed").get<std::uint64_t>();
    m.uncertainty = uncertainty_from_string(manifest.at("uncertainty").get<std::string>());
    m.task_names = manifest.at("task_names").get<std::vector<std::string>>();
    const auto& tasks = manifest.at("tasks");
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      const auto& tj = tasks[t];
      const std::string ts = std::to_string(t);
      lps::TaskPartition part;
      part.task_id = t;
      part.alpha = tj.at("alpha").get<double>();
      part.beta = tj.at("beta").get<double>();
      for (std::size_t i = 0; i < params.size(); ++i) {
        part.owned.push_back(mask_from(sections, "mask/" + ts + "/owned/" + params[i].name, params[i].size()));
        part.adaptive.push_back(mask_from(sections, "mask/" + ts + "/adaptive/" + params[i].name, params[i].size()));
        for (std::size_t k = 0; k < params[i].size(); ++k) {
          if (part.owned[i][k]) m.state.cumulative[i][k] = 1;
        }
      }
      m.state.archive.push_back(std::move(part));
      m.state.heads.push_back(params_from(tj.at("head"), sections, "head/" + ts + "/"));
      m.head_classes.push_back(tj.at("classes").get<std::vector<int>>());
      if (heads::class_count(m.kind(), m.state.heads.back()) != m.head_classes.back().size()) {
        throw DataError("checkpoint head " + ts + " class count mismatch");
      }
    }
    if (m.state.archive.empty()) throw DataError("checkpoint holds no tasks");
    for (std::size_t i = 0; i < params.size(); ++i) params[i].frozen = m.state.cumulative[i];
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint config: ") + e.what());
  }
}

}  // namespace elc
