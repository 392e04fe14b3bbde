#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cate {

// Exit codes: 0 success, 1 usage error, 2 runtime error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Entry point of the `cate` tool. `args` includes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cate
