#pragma once

#include <iosfwd>

namespace san::cli {

/// Runs one invocation of the `san` tool. Results go to `out` (or --out),
/// diagnostics to `err`. Returns 0 on success, 2 on usage errors and 1 on
/// runtime failures.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace san::cli
