#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace psyduck {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Sample shapes or dtypes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Payload does not fit into the carrier.
class CapacityError : public Error {
 public:
  CapacityError(const std::string& what, std::size_t max_payload_bytes)
      : Error(what), max_payload_bytes_(max_payload_bytes) {}

  std::size_t max_payload_bytes() const noexcept { return max_payload_bytes_; }

 private:
  std::size_t max_payload_bytes_;
};

/// Decoded header is implausible: wrong key or corrupted carrier.
class FramingError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File or stream could not be read, written or parsed.
class IoError : public Error {
 public:
  using Error::Error;
};

/// External backend failed, misbehaved or timed out.
class BackendError : public Error {
 public:
  using Error::Error;
};

}  // namespace psyduck
