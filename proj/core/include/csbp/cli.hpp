#pragma once

#include <iosfwd>

namespace csbp {

// Exit codes: 0 ok, 1 validation error (bad flags, bad config, missing
// file), 2 numeric failure, 3 experiment verdict failure.
enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitNumeric = 2, kExitVerdict = 3 };

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int cli_main(int argc, const char* const* argv);

}  // namespace csbp
