#pragma once

#include <span>
#include <stdexcept>
#include <string>

namespace susl {

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Incompatible array shapes handed to an operator. The message names the
/// operator and both shapes.
struct ShapeError : Error {
  using Error::Error;
};

/// Malformed or inconsistent input files (raw datasets, bundles, checkpoints).
struct DataError : Error {
  using Error::Error;
};

/// Invalid configuration values (model, regime, training, search).
struct ConfigError : Error {
  using Error::Error;
};

/// A forward computation produced a non-finite value from finite inputs.
struct NumericError : Error {
  using Error::Error;
};

/// Training step aborted: non-finite loss or gradient.
struct DivergenceError : Error {
  DivergenceError(const std::string& what, std::string parameter, long batch_index)
      : Error(what), parameter(std::move(parameter)), batch_index(batch_index) {}
  std::string parameter;
  long batch_index = -1;
};

std::string shape_str(std::span<const int> shape);

}  // namespace susl
