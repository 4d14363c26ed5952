#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace plp::cli {

// Runs one command line (args excludes the program name) and returns the
// process exit code: 0 ok, 2 config, 3 data, 4 network, 5 internal.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace plp::cli
