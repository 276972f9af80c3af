#pragma once

#include <stdexcept>
#include <string>

namespace streamdcim {

// Error taxonomy shared across modules. Every failure mode maps onto one of
// these so callers (tests, CLI) can distinguish bad configs from scheduler
// bugs without string matching.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& m) : std::runtime_error("shape error: " + m) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& m) : std::runtime_error("config error: " + m) {}
};

struct ScheduleError : std::runtime_error {
  explicit ScheduleError(const std::string& m) : std::runtime_error("scheduling error: " + m) {}
};

struct CapacityError : std::runtime_error {
  explicit CapacityError(const std::string& m) : std::runtime_error("capacity error: " + m) {}
};

struct DataflowError : std::runtime_error {
  explicit DataflowError(const std::string& m) : std::runtime_error("dataflow error: " + m) {}
};

struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& m) : std::runtime_error("validation error: " + m) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& m) : std::runtime_error("i/o error: " + m) {}
};

}  // namespace streamdcim
