#pragma once

#include <stdexcept>
#include <string>

namespace kfbi {

// Error categories map one-to-one onto the CLI exit codes:
// ConfigError -> 2, NumericalError -> 3, MissingArtifact -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class MissingArtifact : public Error {
 public:
  using Error::Error;
};

// Broken internal invariant (a bug, not bad input).
class InternalFault : public Error {
 public:
  using Error::Error;
};

}  // namespace kfbi
