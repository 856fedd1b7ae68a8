#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace facediff::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one subcommand. args excludes the program name. Normal output goes to
/// out; usage text and errors go to err.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Quick invariant checks; prints one PASS/FAIL line per check. Returns the
/// number of failures.
int run_selftest(std::ostream& out);

}  // namespace facediff::cli
