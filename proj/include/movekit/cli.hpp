#pragma once

namespace movekit {

// Entry point behind the `movekit` binary; exposed so tests can drive
// subcommands in-process. Exit codes: 0 success, 2 usage error, 3 data error,
// 4 numerical failure.
int run_cli(int argc, const char* const* argv);

}  // namespace movekit
