#pragma once

#include <iosfwd>

namespace termctl::cli {

/// Parses argv and runs one subcommand. JSON goes to `out`; usage errors go
/// to `err`. Returns 0 on success, 1 on usage errors and 2 on computational
/// errors (with a JSON error object on `out`).
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace termctl::cli
