#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace slowfast {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

// Runs one command line (without the program name). Subcommands: train-teacher,
// distill, sample, eval, ablate, baseline-calibrate, rerun.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace slowfast
