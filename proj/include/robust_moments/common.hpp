#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace robust_moments {

inline constexpr std::string_view kVersion = "0.1.0";

/// Raised when an input violates a documented precondition or type invariant.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for user-facing configuration mistakes (bad flags, bad config
/// values). The CLI maps this to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised while reading delimited text; carries the 1-based line number of
/// the offending row (0 when the problem is not tied to a row).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : std::runtime_error(message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-fatal numerical conditions (jitter added, rank reduced, ...) are
// reported through a process-wide handler. The default writes to stderr.
using WarningHandler = std::function<void(std::string_view)>;
void set_warning_handler(WarningHandler handler);
void warn(std::string_view message);

// Thread count used for per-group parallel work. 1 means run inline.
void set_num_threads(int threads);
int num_threads();

// Runs fn(0..count-1), splitting the index range over num_threads() workers.
// Each index must write only to its own output slot.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

// %.17g formatting, enough digits for an exact double round-trip.
std::string format_double(double value);

}  // namespace robust_moments
