#pragma once

#include <filesystem>

#include "elc/model.hpp"

namespace elc {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout: "ELCK", u32 version, u64 manifest length, JSON manifest,
// then named sections of f64 values or LSB-first packed masks.
void save_checkpoint(const std::filesystem::path& path, const Model& model);

// Throws DataError on a bad magic, version or a truncated file. Nothing is
// returned unless every section parsed.
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace elc
