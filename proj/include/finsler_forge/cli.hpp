#pragma once

#include <string>

#include "finsler_forge/config.hpp"

namespace finsler {

// Exit codes: 0 success, 1 verify residual above tolerance, 2 input error
// (config or expression, with diagnostics), 3 model error, 4 numeric error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitResidual = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitModel = 3;
inline constexpr int kExitNumeric = 4;

// Execute one configured run, writing outputs under `out_dir`.
int run(const RunConfig& cfg, const std::string& out_dir);

// Full command line: <binary> <command> --config <path> [--out <dir>]
// [--threads N] [--tolerance X].
int run_main(int argc, const char* const* argv);

}  // namespace finsler
