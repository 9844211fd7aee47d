#pragma once

#include <iosfwd>

namespace mfsr::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kDataError = 3, kNumerical = 4 };

/// Runs one command (train, eval, score, synth, gradcheck, paramcount,
/// parallax, chirp). Results go to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mfsr::cli
