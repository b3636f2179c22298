#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hyperbo {

// Base of every error raised by the library. kind() is a stable
// machine-readable tag used by the CLI error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  [[nodiscard]] const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& what) : Error("argument", what) {}
};

// Cholesky failed at every rung of the jitter ladder.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::vector<double> jitters)
      : Error("numerical", what), jitters_(std::move(jitters)) {}
  [[nodiscard]] const std::vector<double>& attempted_jitters() const noexcept { return jitters_; }

 private:
  std::vector<double> jitters_;
};

class InsufficientDataError : public Error {
 public:
  explicit InsufficientDataError(const std::string& what) : Error("insufficient_data", what) {}
};

class DegenerateDataError : public Error {
 public:
  explicit DegenerateDataError(const std::string& what) : Error("degenerate_data", what) {}
};

class FitError : public Error {
 public:
  FitError(std::string space_id, const std::string& what)
      : Error("fit", what), space_id_(std::move(space_id)) {}
  [[nodiscard]] const std::string& space_id() const noexcept { return space_id_; }

 private:
  std::string space_id_;
};

class LoadError : public Error {
 public:
  explicit LoadError(const std::string& what) : Error("load", what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

}  // namespace hyperbo
