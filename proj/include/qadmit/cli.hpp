#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qadmit {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Entry point of the `qadmit` tool; `args` excludes the program name.
/// Subcommands: analyze, learn, plot, oracle.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qadmit
