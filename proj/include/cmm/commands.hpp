#pragma once

#include <iosfwd>

namespace cmm {

// Exit codes of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitRuntimeError = 2;

// Environment variable that roots relative --out directories.
inline constexpr const char* kOutputRootEnv = "CMM_OUTPUT_ROOT";

// Entry point of the `cmm` tool:
//   cmm <generate|train|compare|gradcheck|curves|eval> --config FILE [--out DIR]
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace cmm
