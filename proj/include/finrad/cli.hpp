#pragma once

#include <string>
#include <vector>

namespace finrad::cli {

/// Dispatches the `finrad` subcommands. Exit codes: 0 success, 1 usage
/// error (unknown subcommand/flag, missing required flag), 2 runtime error.
int run_cli(const std::vector<std::string>& args);

} // namespace finrad::cli
