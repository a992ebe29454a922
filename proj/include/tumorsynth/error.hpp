#pragma once

#include <stdexcept>
#include <string>

namespace tumorsynth {

/// Failure category. Maps one-to-one onto CLI exit codes.
enum class ErrorKind {
  Usage = 1,      // bad arguments or configuration
  Data = 2,       // malformed or inconsistent input data
  Numerical = 3,  // instability, non-finite values
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void usage_error(const std::string& what) { throw Error(ErrorKind::Usage, what); }
[[noreturn]] inline void data_error(const std::string& what) { throw Error(ErrorKind::Data, what); }
[[noreturn]] inline void numerical_error(const std::string& what) {
  throw Error(ErrorKind::Numerical, what);
}

}  // namespace tumorsynth
