#pragma once

#include <string>
#include <vector>

namespace convlat::cli {

// Parses argv (argv[0] is the program name) and runs one subcommand.
// Returns the process exit code.
int run(const std::vector<std::string> &argv);

} // namespace convlat::cli
