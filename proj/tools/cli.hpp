#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nlos::cli {

/// Runs one command line (without the program name). Returns the process
/// exit code: 0 success, 2 usage or validation error, 1 runtime error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nlos::cli
