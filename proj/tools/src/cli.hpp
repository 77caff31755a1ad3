#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace srlp::cli {

/// Runs one command. Returns 0 on success, 2 on usage errors and 1 on any
/// other failure, after printing a one-line JSON error record to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace srlp::cli
