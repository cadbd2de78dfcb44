#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ilt {

/// Runs one `ilt` subcommand. args[0] is the program name. Failures print a
/// single JSON line {"error":{"command":..,"message":..}} to `err` and
/// return nonzero; nothing is thrown.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ilt
