#pragma once

#include <iosfwd>

namespace crxo {

// Exit codes: 0 success, 2 user or config error, 3 I/O, 4 numerical failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace crxo
