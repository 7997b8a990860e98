#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace tinyva::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitRuntime = 2,
  kExitNonCompliant = 3,
};

inline constexpr std::uint64_t kDefaultSeed = 42;

/// Runs one `tinyva` invocation. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tinyva::cli
