#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace imed {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

/// Creates `dir`; a non-empty existing directory is an error unless force,
/// in which case it is cleared first.
void prepare_output_dir(const std::filesystem::path& dir, bool force);

/// Compact JSON with a fixed key order (nlohmann sorts keys) and shortest
/// round-trip doubles; stable for identical inputs.
std::string dump_line(const nlohmann::json& j);

}  // namespace imed
