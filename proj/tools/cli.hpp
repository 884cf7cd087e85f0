#pragma once

#include <iosfwd>

namespace jenn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "JENN_OUTPUT_DIR";

/// Parses argv and runs one subcommand. Returns 0 on success, 1 on a runtime
/// failure and 2 on a usage or configuration error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace jenn::cli
