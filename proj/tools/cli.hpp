#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vis2ir::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUser = 1;     // bad arguments, config or input files
inline constexpr int kExitRuntime = 2;  // training divergence or internal failure

/// Entry point shared by the executable and the tests. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vis2ir::cli
