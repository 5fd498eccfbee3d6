#pragma once

#include <ostream>
#include <span>
#include <string>

namespace rsgan::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitFormat = 4;

/// Parses and runs one subcommand. Every failure is reported on `err` and
/// mapped to an exit code; nothing escapes as an exception.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace rsgan::cli
