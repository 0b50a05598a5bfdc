#pragma once

namespace tbm {

/// Entry point for the `tbm` command line tool. Exit codes: 0 success,
/// 2 configuration error, 3 I/O failure, 4 schema mismatch, 5 integrity
/// (checkpoint/manifest hash) mismatch.
int run_cli(int argc, const char* const* argv);

}  // namespace tbm
