#pragma once

#include <string>
#include <vector>

namespace mesa {

/// Entry point of the command-line surface. Exit codes: 0 success,
/// 2 usage/validation error, 1 runtime failure.
int run_cli(std::vector<std::string> args);

}  // namespace mesa
