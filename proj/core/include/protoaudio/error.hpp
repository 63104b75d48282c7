#pragma once

#include <stdexcept>
#include <string>

namespace protoaudio {

enum class ErrorCode {
  kMissingFile,
  kMalformedHeader,
  kUnsupportedFormat,
  kInvalidArgument,
  kShapeMismatch,
  kInsufficientSamples,
  kDegenerateData,
  kConfig,
  kIo,
};

const char* to_string(ErrorCode code) noexcept;

/// Library-wide exception. `field()` names the offending input (a WAV header
/// field, a config key, a class name) when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string field, const std::string& message)
      : std::runtime_error(message), code_(code), field_(std::move(field)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorCode code_;
  std::string field_;
};

[[noreturn]] inline void fail(ErrorCode code, std::string field, const std::string& message) {
  throw Error(code, std::move(field), message);
}

}  // namespace protoaudio
