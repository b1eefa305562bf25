#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace h3t {

/// Runs the command line (args excludes the program name). Returns the exit
/// code: 0 success, 1 usage or configuration error, 2 data error, 3 numeric
/// abort.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace h3t
