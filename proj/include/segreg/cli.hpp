#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace segreg::cli {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUserError = 1;
inline constexpr int kExitNumericalError = 2;

// Runs one subcommand. `args` excludes the program name. Failures print a single
// JSON line {"error": kind, "message": ..., "location": ...} to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace segreg::cli
