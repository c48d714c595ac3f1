#pragma once

#include <stdexcept>
#include <string>

namespace mslong {

// Invalid or inconsistent input data (CSV parse failures, invariant
// violations, bad configuration values). CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// A method failed while running (singular system, divergent chain, ...).
// Carries the method id so harness errors always name the offender.
// CLI maps this to exit code 3.
class MethodError : public std::runtime_error {
 public:
  MethodError(std::string method, const std::string& what)
      : std::runtime_error(method + ": " + what), method_(std::move(method)) {}
  const std::string& method() const { return method_; }

 private:
  std::string method_;
};

}  // namespace mslong
