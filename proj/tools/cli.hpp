#pragma once

#include <ostream>
#include <string>

namespace stiffavg::cli {

// Exit statuses of run().
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;   // a study or the selftest did not pass
inline constexpr int kExitUsage = 2;    // bad command line
inline constexpr int kExitConfig = 3;   // config could not be read or validated
inline constexpr int kExitRuntime = 4;  // the computation itself threw

/// Parses argv, runs one subcommand and returns the exit status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Shortest round-trip decimal form of x.
std::string format_double(double x);

/// Writes `content` to `path` through a sibling temp file and a rename.
void write_atomic(const std::string& path, const std::string& content);

}  // namespace stiffavg::cli
