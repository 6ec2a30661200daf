#pragma once

#include <stdexcept>
#include <string>

namespace biasdet {

// Error taxonomy shared by the library and the CLI. The CLI maps these to
// exit codes: ConfigError -> 1, DataError (and subclasses) -> 2,
// NumericError -> 3. ContractError signals caller misuse and is not an
// expected runtime outcome.

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public DataError {
 public:
  explicit IoError(const std::string& msg) : DataError(msg) {}
};

class FormatError : public DataError {
 public:
  explicit FormatError(const std::string& msg) : DataError(msg) {}
};

class CorruptionError : public DataError {
 public:
  explicit CorruptionError(const std::string& msg) : DataError(msg) {}
};

class IncompatibilityError : public DataError {
 public:
  explicit IncompatibilityError(const std::string& msg) : DataError(msg) {}
};

class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// Thrown when training hits a non-finite loss; carries enough context to
// reproduce the failing step.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& msg, long step, double lr,
               std::string batch_ids)
      : std::runtime_error(msg), step(step), lr(lr),
        batch_ids(std::move(batch_ids)) {}

  long step = -1;
  double lr = 0.0;
  std::string batch_ids;
};

}  // namespace biasdet
