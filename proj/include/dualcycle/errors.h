#ifndef DUALCYCLE_ERRORS_H_
#define DUALCYCLE_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dualcycle {

// Error taxonomy shared by all modules. Every exception carries a short
// machine-readable kind string so the CLI can emit single-line diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(msg), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error("invalid-shape", msg) {}
};

class LabelError : public Error {
 public:
  explicit LabelError(const std::string& msg) : Error("invalid-label", msg) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& msg) : Error("contract", msg) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t offset)
      : Error("parse", msg + " (byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class EmptyDatasetError : public Error {
 public:
  explicit EmptyDatasetError(const std::string& msg)
      : Error("empty-dataset", msg) {}
};

class RewardError : public Error {
 public:
  explicit RewardError(const std::string& msg) : Error("reward", msg) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error("config", msg) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error("io", msg) {}
};

// Raised when a training step produces a non-finite loss; the trainer fills
// in epoch/batch coordinates before rethrowing.
class TrainAbort : public Error {
 public:
  explicit TrainAbort(const std::string& msg) : Error("train-abort", msg) {}
};

}  // namespace dualcycle

#endif  // DUALCYCLE_ERRORS_H_
