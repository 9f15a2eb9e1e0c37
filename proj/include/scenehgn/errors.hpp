#pragma once

#include <stdexcept>
#include <string>

namespace scenehgn {

/// Base class for every error raised by the library. The CLI maps
/// subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidPlacement : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed serialized input. `where()` is a JSON pointer or a byte offset.
class ParseError : public Error {
 public:
  ParseError(const std::string& where, const std::string& what)
      : Error("parse error at " + where + ": " + what), where_(where) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

class InvalidFloor : public Error {
 public:
  using Error::Error;
};

class DegenerateRing : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class OptimizerError : public Error {
 public:
  OptimizerError(int iteration, const std::string& what)
      : Error("optimizer diverged at iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

class TrainingError : public Error {
 public:
  TrainingError(int step, const std::string& what)
      : Error("training failed at step " + std::to_string(step) + ": " + what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace scenehgn
