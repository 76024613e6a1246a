#pragma once

#include <string>
#include <vector>

namespace spdnet {

/// Runs the command-line front end (train, evaluate, predict, benchmark,
/// generate-data, inspect-periods). `args` excludes the program name.
/// Returns 0 on success, 1 on runtime errors, 2 on usage errors.
int run_cli(const std::vector<std::string>& args);

}  // namespace spdnet
