#pragma once

#include <stdexcept>
#include <string>

namespace hashrag {

// Failure category. The CLI maps these onto process exit codes.
enum class ErrorKind {
  kInput,        // malformed or inconsistent input, exit 2
  kEmptyResult,  // nothing to emit, exit 3
  kNumeric,      // non-finite values during optimization, exit 4
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error InputError(const std::string& what) {
  return Error(ErrorKind::kInput, what);
}

}  // namespace hashrag
