#pragma once

#include <stdexcept>
#include <string>

namespace iteach {

enum class ErrorCode {
  InvalidArgument,
  Parse,
  NotFound,
  Transport,
  GenerationFailed,
  Numeric,
  Io,
  Schema,
  Experiment,
  Internal,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Grammar violation while reading a structured document. `path` locates the
// offending element, e.g. "steps[2].check.threshold".
class ParseError : public Error {
 public:
  ParseError(std::string path, const std::string& message)
      : Error(ErrorCode::Parse, path.empty() ? message : path + ": " + message),
        path_(std::move(path)),
        detail_(message) {}

  const std::string& path() const noexcept { return path_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string path_;
  std::string detail_;
};

}  // namespace iteach
