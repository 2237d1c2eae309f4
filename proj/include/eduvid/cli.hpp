#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace eduvid::cli {

/// Runs one eduvid command line (args exclude the program name). Returns the
/// process exit code: 0 success, 1 validation or usage error, 2 I/O error.
int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace eduvid::cli
