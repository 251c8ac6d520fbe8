#pragma once

#include <string>
#include <vector>

namespace adsm::cli {

// Exit codes of every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

/// Parses and runs one command line (without the program name).
int run(const std::vector<std::string>& args);

}  // namespace adsm::cli
