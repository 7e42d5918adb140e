#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace prpm::cli {

/// Entry point of the prpm tool. Returns the process exit code: 0 on
/// success, 1 on a pipeline error, 2 on a usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace prpm::cli
