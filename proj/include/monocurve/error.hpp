#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace monocurve {

enum class Errc {
  InvalidArgument,
  EmptyBox,
  DimensionMismatch,
  NoConvergence,
  NotStrictlyIncreasing,
  OutOfRange,
  NonFinite,
  DegenerateColumn,
  CovarianceNotPSD,
  ParseError,
  RaggedRows,
  EmptySet,
  SizeMismatch,
  TooFew,
  TapeMismatch,
  Io,
};

std::string_view errc_name(Errc code);

/// Library-wide exception. `code()` identifies the failure class so that
/// callers (the CLI in particular) can map it onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace monocurve
