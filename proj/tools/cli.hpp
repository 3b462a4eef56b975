#pragma once

#include <string>
#include <vector>

namespace monocurve::cli {

enum ExitCode { Ok = 0, Usage = 1, DataError = 2, NumericalError = 3 };

/// Entry point of the `monocurve` tool; returns the process exit code.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

/// Reads a flat `key = value` file ('#' starts a comment) and turns it into
/// `--key=value` arguments, skipping keys already present in `explicit_args`.
std::vector<std::string> config_arguments(const std::string& path,
                                          const std::vector<std::string>& explicit_args);

}  // namespace monocurve::cli
