#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pinlog::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Runs one invocation; args excludes the program name. Returns 0 on
/// success, 1 on validation errors, 2 on runtime failures.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pinlog::cli
