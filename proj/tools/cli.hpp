#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cyclehash::cli {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kOutEnv = "CYCLEHASH_OUT";

/// Runs one command; `args` excludes the program name. Returns the process
/// exit code: 0 success, 1 runtime failure, 2 configuration or usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cyclehash::cli
