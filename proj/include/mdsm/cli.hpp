#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mdsm {

// Exit codes: 0 success, 1 runtime failure (numeric, capacity, ...),
// 2 usage or configuration error, 3 unreadable, corrupt or incompatible input.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInput = 3;

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace mdsm
