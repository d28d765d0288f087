// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>

namespace convrates {

/// Exit statuses of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitGeneric = 1,
  kExitConfig = 2,
  kExitPrecondition = 3,
  kExitProperty = 4,
};

/// Entry point: `convrates VERB [--config FILE] [--output DIR] [--seed N]`.
/// Reports go to `out`; failures print one JSON error record to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace convrates
