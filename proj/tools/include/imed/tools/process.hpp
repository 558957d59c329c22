#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace imed::tools {

/// Path of the running executable.
std::filesystem::path self_executable();

/// Runs `exe args...` as a child process with stdout and stderr appended to
/// `log`; returns the exit status (128 + signal for signalled children).
int run_child(const std::filesystem::path& exe, const std::vector<std::string>& args,
              const std::filesystem::path& log);

/// Last non-empty line of a text file ("" if unreadable).
std::string last_line(const std::filesystem::path& path);

}  // namespace imed::tools
