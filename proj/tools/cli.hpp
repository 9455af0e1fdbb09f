#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace semuv::cli {

// Runs one `semuv` command. Returns 0 on success, 1 on usage errors and 2 on
// runtime errors. Machine-readable output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace semuv::cli
