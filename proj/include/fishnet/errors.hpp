#pragma once

#include <stdexcept>
#include <string>

namespace fish {

// Raised when an operation's input shapes or attributes are inconsistent.
// Messages always name the offending node and the expected/actual dims.
class ShapeError : public std::runtime_error {
public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised by config parsing/validation; carries the stage index when the
// violation is tied to a particular stage (-1 otherwise).
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg, int stage = -1)
      : std::runtime_error(msg), stage_(stage) {}
  int stage() const { return stage_; }

private:
  int stage_;
};

class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fish
