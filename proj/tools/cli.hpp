#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace maskexplain::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitDiverged = 4;

/// Runs `maskexplain <args...>` (args excludes the program name) and returns
/// the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace maskexplain::cli
