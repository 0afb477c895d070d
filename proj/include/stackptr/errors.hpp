#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stackptr {

// Malformed input text (CoNLL, embeddings, config, checkpoint manifest).
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Inconsistent hyperparameters or plan settings.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated structural contract (tree shape, tensor shape, transition legality).
class InvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stackptr
