#ifndef PANELBN_CLI_HPP
#define PANELBN_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace panelbn::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_validation = 1;
inline constexpr int exit_internal = 2;
inline constexpr int exit_usage = 64;

/// Runs the command line in `args` (args[0] is the program name). Artifacts
/// go to the files named by the flags; summaries and diagnostics go to
/// `out` and `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string sha256_file(const std::string& path);

}  // namespace panelbn::cli

#endif  // PANELBN_CLI_HPP
