#pragma once

#include <ostream>

namespace railevent::cli {

// Exit codes
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;      // anything not covered below
inline constexpr int kUsage = 2;        // bad flags or flag values
inline constexpr int kBadFormat = 3;    // malformed CSV / manifest / model, unknown version
inline constexpr int kMissingFile = 4;  // an input path does not exist

/// Runs one subcommand. Results go to `out`; the resolved configuration and
/// diagnostics go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace railevent::cli
