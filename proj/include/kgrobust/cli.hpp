#pragma once

#include <string>
#include <vector>

namespace kgrobust {

// Subcommands: run, poison, metrics, sweep-tau. Returns 0 on success, 1 on a
// runtime failure, 2 on usage or configuration errors.
int cli_main(int argc, const char* const* argv);
int cli_main(const std::vector<std::string>& args); // args[0] is the program name

} // namespace kgrobust
