#pragma once

#include <string>
#include <vector>

namespace geoflow {

// Exit codes of the command line tool.
enum ExitCode { kOk = 0, kFailure = 1, kRejected = 2, kBadInput = 3 };

// args excludes the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace geoflow
