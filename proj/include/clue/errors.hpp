#pragma once

#include <stdexcept>
#include <string>

namespace clue {

// Error categories map 1:1 onto CLI exit codes and the machine-readable
// error JSON emitted on stderr.
enum class ErrorCategory { io, schema, numeric };

inline const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::io: return "io";
    case ErrorCategory::schema: return "schema";
    case ErrorCategory::numeric: return "numeric";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void throw_io(const std::string& msg) {
  throw Error(ErrorCategory::io, msg);
}
[[noreturn]] inline void throw_schema(const std::string& msg) {
  throw Error(ErrorCategory::schema, msg);
}
[[noreturn]] inline void throw_numeric(const std::string& msg) {
  throw Error(ErrorCategory::numeric, msg);
}

}  // namespace clue
