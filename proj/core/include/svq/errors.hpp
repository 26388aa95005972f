#pragma once

#include <stdexcept>
#include <string>

namespace svq {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad size, non-positive width, ...).
class InvalidArgument : public Error {
public:
  using Error::Error;
};

class EmptyDataset : public InvalidArgument {
public:
  using InvalidArgument::InvalidArgument;
};

class DimensionMismatch : public InvalidArgument {
public:
  using InvalidArgument::InvalidArgument;
};

/// A file could not be read, written, or parsed, or its contents violate an invariant.
class FormatError : public Error {
public:
  using Error::Error;
};

/// Training produced a non-finite objective.
class DivergenceError : public Error {
public:
  DivergenceError(std::size_t epoch, std::size_t stage, const std::string& what)
      : Error(what), epoch_(epoch), stage_(stage) {}

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t stage() const noexcept { return stage_; }

private:
  std::size_t epoch_;
  std::size_t stage_;
};

}  // namespace svq
