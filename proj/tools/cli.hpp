#pragma once

#include <iosfwd>

namespace ftcbf {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitCounterexample = 2;

/// Command-line entry point: run, calibrate and verify subcommands.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ftcbf
