#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vsdalign::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `vsdalign` tool. `args` excludes the program name.
/// Subcommands: synth, train, eval, cluster, gradcheck, inspect.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vsdalign::cli
