#pragma once

namespace cotlab::cli {

// Subcommand dispatcher. Exit codes: 0 success, 2 configuration/usage error,
// 1 runtime failure.
int dispatch(int argc, const char* const* argv);

}  // namespace cotlab::cli
