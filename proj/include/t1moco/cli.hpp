#pragma once

#include <iosfwd>

namespace t1moco::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,       // a computation failed or produced non-finite output
  kInvalidInput = 2,  // bad flags or configuration
  kIoFailure = 3,
};

// Entry point of the t1moco tool. Errors are reported on `err` as a single
// JSON object.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace t1moco::cli
