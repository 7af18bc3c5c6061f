#pragma once

#include <stdexcept>
#include <string>

namespace elves {

// Malformed input model files (bad safetensors header, offsets, dtypes...).
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Damaged or inconsistent archive / codec payloads.
struct CorruptionError : std::runtime_error {
  explicit CorruptionError(const std::string& what) : std::runtime_error(what) {}
};

// A bit-level read ran past the logical end of a stream.
struct EndOfStream : CorruptionError {
  explicit EndOfStream(const std::string& what) : CorruptionError(what) {}
};

// Filesystem-level failures (open/read/write/rename).
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Archive references a final-stage backend this build does not provide.
struct UnsupportedBackendError : std::runtime_error {
  explicit UnsupportedBackendError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace elves
