#pragma once

#include <stdexcept>
#include <string>

namespace boxc {

enum class ErrorKind {
  BehindCamera,
  EmptyCloud,
  DegenerateBox,
  InvalidAxis,
  InvalidCrop,
  ZeroSize,
  DegenerateConfiguration,
  InsufficientCorrespondences,
  NumericFailure,
  Shape,
  Config,
  InvalidArgument,
  InvalidFeature,
  Format,
  Io,
};

const char* to_string(ErrorKind kind) noexcept;

// Single exception type for the library; `kind()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace boxc
