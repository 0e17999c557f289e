#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace stmtl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

/// Runs one `stmtl` command line (args excludes the program name) and returns
/// the process exit code. Diagnostics go to `err`, summaries to `out`.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

} // namespace stmtl
