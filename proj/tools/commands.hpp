#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hashrag::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kInputError = 2;
inline constexpr int kEmptyResult = 3;
inline constexpr int kNumericFailure = 4;

// Entry point for the `hashrag` executable. Subcommands: train, build-index,
// query, evaluate, prompt, synth. Errors are reported as a single line on `err`.
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hashrag::cli
