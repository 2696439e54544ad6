#pragma once

#include <stdexcept>
#include <string>

namespace blast {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: a config document, a data file, a parameter vector.
// `path` names the offending field when one exists ("learner.population").
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what, std::string path = {})
      : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Malformed file contents (extended XYZ, result files).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Physics routines refusing an input (half-cell violation, no interior minimum, ...).
class ComputeError : public Error {
 public:
  using Error::Error;
};

// Wire protocol violation or transport failure.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// A stop request interrupted a blocking operation.
class Cancelled : public Error {
 public:
  using Error::Error;
};

}  // namespace blast
