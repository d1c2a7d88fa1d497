#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hyrsm {

// Error taxonomy shared by the library and the CLI exit-code mapping:
// usage/configuration problems map to exit 1, runtime/data problems to exit 2.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes or ragged inputs.
struct DimensionError : Error {
  using Error::Error;
};

// Input outside an operation's mathematical domain (e.g. empty sequence).
struct DomainError : Error {
  using Error::Error;
};

// API misuse (double backward, oracle size bound exceeded, bad metric name).
struct UsageError : Error {
  using Error::Error;
};

// Invalid configuration values or unknown config keys.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed on-disk data; carries the byte offset where parsing failed.
struct ParseError : Error {
  ParseError(const std::string& msg, std::size_t at)
      : Error(msg + " (at byte offset " + std::to_string(at) + ")"), offset(at) {}
  std::size_t offset;
};

// Runtime data failure (IO, non-finite loss, missing file).
struct DataError : Error {
  using Error::Error;
};

}  // namespace hyrsm
