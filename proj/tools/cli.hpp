#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace routesig::cli {

/// Runs one subcommand. `args` excludes the program name.
/// Returns 0 on success, 2 on a usage error, 1 on a runtime failure.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace routesig::cli
