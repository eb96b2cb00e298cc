#ifndef HYPOQL_CLI_HPP
#define HYPOQL_CLI_HPP

#include <string>
#include <vector>

namespace hypoql {

/// Command line entry point. Subcommands: simulate, estimate, mc, check.
/// Returns 0 on success, 1 on usage errors, 2 on runtime errors; messages go
/// to stderr.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, const char* const* argv);

} // namespace hypoql

#endif
