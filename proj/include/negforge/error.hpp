#pragma once

#include <stdexcept>
#include <string>

namespace negforge {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed CoNLL-U input. Carries the sentence id and 1-based input line.
class ParseError : public Error {
 public:
  ParseError(std::string sent_id, std::size_t line, const std::string& what)
      : Error("sentence '" + sent_id + "', line " + std::to_string(line) + ": " + what),
        sent_id_(std::move(sent_id)),
        line_(line) {}

  const std::string& sent_id() const noexcept { return sent_id_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string sent_id_;
  std::size_t line_;
};

/// A precondition on an argument was violated (bad index, count mismatch...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace negforge
