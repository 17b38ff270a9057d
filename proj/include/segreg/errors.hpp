#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace segreg {

enum class ErrorKind {
  InvalidArgument,
  LengthMismatch,
  NonMonotonicTime,
  NonFiniteValue,
  RankDeficient,
  SegmentTooShort,
  Infeasible,
  EmptyComponent,
  SingularHessian,
  ParseError,
  IoError,
  SchemaError,
};

std::string_view to_string(ErrorKind kind);

// True for failures caused by the numerics rather than by the caller's input.
bool is_numerical(ErrorKind kind);

// Single exception type for the library. `location` carries the line number,
// sample index or EM iteration the error refers to, when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::optional<std::size_t> location = std::nullopt)
      : std::runtime_error(message), kind_(kind), location_(location) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> location() const noexcept { return location_; }

 private:
  ErrorKind kind_;
  std::optional<std::size_t> location_;
};

}  // namespace segreg
