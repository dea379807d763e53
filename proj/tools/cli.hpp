#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cprdraft::cli {

/// Runs `cprdraft <command> [flags]`; args excludes the program name.
/// Returns 0 on success, 1 on a user error, 2 on an internal error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cprdraft::cli
