#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace patvar::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;

// Runs one command line (args[0] is the program name). Tabular results go to
// `out`, a single-line error to `err`; "-" as input path reads `in`.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace patvar::cli
