#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace centile::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitUsage = 2;

/// Runs one subcommand.  `args` excludes the program name.  Tables and
/// reports go to `out`, diagnostics and usage text to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace centile::cli
