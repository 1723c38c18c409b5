#pragma once

namespace ctap {

/// Entry point of the `ctap` tool. Returns the process exit code:
/// 0 success (non-convergence included), 2 input error, 3 numeric failure,
/// 4 invariant violation.
int run_cli(int argc, char** argv);

}  // namespace ctap
