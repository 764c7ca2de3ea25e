#pragma once

#include <stdexcept>
#include <string>

namespace flattrack {

// Process exit codes used by the CLI.
enum class ExitCode : int { ok = 0, config = 2, data = 3, numerical = 4 };

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Invalid or unknown configuration and inconsistent dimensions.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ExitCode::config, what) {}
};

/// Malformed or unreadable files and broken manifests.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ExitCode::data, what) {}
};

/// Numerical breakdown such as a NaN loss.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ExitCode::numerical, what) {}
};

/// A gaze direction that never reaches the screen plane (v.z <= 1e-6).
class UnprojectableGaze : public NumericalError {
 public:
  explicit UnprojectableGaze(const std::string& what) : NumericalError(what) {}
};

}  // namespace flattrack
