#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace neurotube::cli {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;   // invalid configuration or arguments
inline constexpr int kExitUsage = 2;    // unknown subcommand or malformed flags
inline constexpr int kExitNumeric = 3;  // non-finite values or failed gradient checks
inline constexpr int kExitIo = 4;       // unreadable, unwritable or malformed files

/// Runs one subcommand. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace neurotube::cli
