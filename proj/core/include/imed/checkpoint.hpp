#pragma once

// Binary checkpoint archive:
//   8 bytes   magic "IMEDCKPT"
//   u32 LE    format version
//   u64 LE    manifest length
//   manifest  JSON {meta, tensors: [{name, rows, cols, offset}]}
//   payload   float32 little-endian tensor data, row-major
// Tensors are keyed by Parameter::name, so a checkpoint restores into any
// freshly built model of the same configuration.

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "imed/tensor.hpp"

namespace imed {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Archive {
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, Matrix> tensors;

  /// Stores every parameter under its name (shared parameters once).
  void put(const ParamList& params);
  /// Loads every parameter by name; missing tensors and shape mismatches throw.
  void restore(const ParamList& params) const;
};

std::string encode_archive(const Archive& a);
Archive decode_archive(const std::string& bytes, const std::string& what = "archive");

void save_archive(const std::filesystem::path& path, const Archive& a);
Archive load_archive(const std::filesystem::path& path);

/// Rounds every value to float32 (what a save/load round trip does).
void round_to_float32(const ParamList& params);

}  // namespace imed
