#pragma once

namespace ccml::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kDataError = 3, kNumericFault = 4, kMissingCells = 5 };

/// Entry point of the `ccml` command; returns the process exit code.
int run(int argc, const char* const* argv);

}  // namespace ccml::cli
