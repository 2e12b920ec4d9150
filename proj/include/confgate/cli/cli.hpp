#pragma once

#include <ostream>

namespace confgate::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitInternal = 3;

// Parses argv and runs one subcommand. Failures print a one-line JSON record
// {"status":"error","exit_code":N,"kind":..,"message":..} as the last line
// written to err.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace confgate::cli
