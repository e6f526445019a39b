#pragma once

namespace wattbench::cli {

// Exit codes: 0 success, 1 usage, 2 data/format, 3 solver/fit.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitSolver = 3;

int run(int argc, char** argv);

}  // namespace wattbench::cli
