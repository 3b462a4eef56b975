#include "monocurve/error.hpp"

namespace monocurve {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::EmptyBox: return "EmptyBox";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::NotStrictlyIncreasing: return "NotStrictlyIncreasing";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::NonFinite: return "NonFinite";
    case Errc::DegenerateColumn: return "DegenerateColumn";
    case Errc::CovarianceNotPSD: return "CovarianceNotPSD";
    case Errc::ParseError: return "ParseError";
    case Errc::RaggedRows: return "RaggedRows";
    case Errc::EmptySet: return "EmptySet";
    case Errc::SizeMismatch: return "SizeMismatch";
    case Errc::TooFew: return "TooFew";
    case Errc::TapeMismatch: return "TapeMismatch";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

}  // namespace monocurve
