#pragma once

#include <stdexcept>
#include <string>

namespace tng {

// Error categories map 1:1 onto CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(const std::string& msg, int exit_code)
      : std::runtime_error(msg), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

struct UsageError : Error {
  explicit UsageError(const std::string& msg) : Error(msg, 1) {}
};

struct DataError : Error {
  explicit DataError(const std::string& msg) : Error(msg, 2) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& msg) : Error(msg, 3) {}
};

}  // namespace tng
