#pragma once

#include <iosfwd>

namespace smx::cli {

/// The `smx` command line. Returns 0 on success, 1 on a domain error (error
/// JSON {code, message, context} written to `err`), 2 on a usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace smx::cli
