#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hbs {

enum class ErrorKind {
    NonFiniteInput,
    DimensionMismatch,
    NotPositiveDefinite,
    GrazingImpact,
    OffSurface,
    DegenerateGradient,
    InconsistentSamples,
    StepFailure,
    AmbiguousCrossing,
    ShapeProjectionUnavailable,
    ParseError,
    ValidationError,
    IoError,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::GrazingImpact: return "GrazingImpact";
    case ErrorKind::OffSurface: return "OffSurface";
    case ErrorKind::DegenerateGradient: return "DegenerateGradient";
    case ErrorKind::InconsistentSamples: return "InconsistentSamples";
    case ErrorKind::StepFailure: return "StepFailure";
    case ErrorKind::AmbiguousCrossing: return "AmbiguousCrossing";
    case ErrorKind::ShapeProjectionUnavailable: return "ShapeProjectionUnavailable";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the kinds above so
/// callers (and tests) can branch on the category rather than the message.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace hbs
