// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MTSE_CORE_ERRORS_H_
#define MTSE_CORE_ERRORS_H_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mtse {

// Bad argument values or shapes handed to an operation.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Inconsistent or unsupported configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file contents. Carries the byte offset where parsing stopped.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string &what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte offset " +
                           std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

// Raised when training diverges (non-finite loss or gradient).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define MTSE_REQUIRE(cond, exc, msg) \
  do {                               \
    if (!(cond)) throw exc(msg);     \
  } while (0)

}  // namespace mtse

#endif  // MTSE_CORE_ERRORS_H_
