#pragma once

#include <stdexcept>
#include <string>

namespace ntl {

// Malformed input: unreadable file, bad header, shape mismatch, value out of
// the documented domain. The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad invocation: unknown flag or config key, missing required argument.
// The CLI maps this to exit code 1.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ntl
