#pragma once

#include <ostream>

namespace stkrl {

// Exit codes of run_cli.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Commands: extract, synth, train, eval-tc, eval-lp, rank-sentences,
// gradcheck. TSV goes to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stkrl
