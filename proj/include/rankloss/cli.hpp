#pragma once

#include <string>
#include <vector>

namespace rankloss::cli {

// Dispatches one subcommand (gen-data, train, eval, verify-bounds, sweep).
// args excludes the program name. Exit codes: 0 success, 1 usage error,
// 2 data error, 3 verify-bounds found a violated bound.
int run_command(std::vector<std::string> args);

}  // namespace rankloss::cli
