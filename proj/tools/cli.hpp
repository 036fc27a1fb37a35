#pragma once

namespace dn::cli {

/// The `dn` command line: generate | ablate | render | filter | stats |
/// judge | winrate | agreement. Returns the process exit code: 0 success,
/// 2 input/validation error, 3 backend/network error.
int run(int argc, const char* const* argv);

}  // namespace dn::cli
