#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace wasecom::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point behind the wasecom binary. Returns the process exit code:
/// 0 on success, 1 on runtime failure, 2 on usage or config errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wasecom::cli
