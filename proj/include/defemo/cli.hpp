#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace defemo {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

// Subcommands: build-aux, train, evaluate, predict, transfer, gradcheck,
// stats. Machine-readable results go to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace defemo
