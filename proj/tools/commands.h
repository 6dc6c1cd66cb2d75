#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace leafkit::cli {

enum ExitCode : int { kOk = 0, kInternal = 1, kUsage = 2, kData = 3, kNumeric = 4 };

// Parses and runs one subcommand. Errors are reported as a single line on
// `err` and mapped to an exit code; nothing is thrown.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace leafkit::cli
