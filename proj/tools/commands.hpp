#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "deepntk/selftest.hpp"

namespace deepntk::cli {

// Parses and executes one command line (args excludes the program name).
// Returns the process exit status: 0 ok, 2 config, 3 numeric, 4 io.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Output-layer invariants: reproducible CSV bodies and complete schema sidecars.
std::vector<CheckResult> cli_invariants();

}  // namespace deepntk::cli
