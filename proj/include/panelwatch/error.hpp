#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace panelwatch {

enum class ErrorCode {
    MalformedHeader,
    MalformedRow,
    NonMonotonicTimestamps,
    NegativePower,
    AllMissing,
    InsufficientOverlap,
    UnknownPanel,
    InvalidArgument,
    InsufficientData,
    SingularDesign,
    MissingInputPanel,
    LengthMismatch,
    InsufficientHistory,
    NoWeatherOverlap,
    WeatherGap,
    TooFewPanels,
    NoCleanModel,
    NotFlagged,
    ClassTooSmall,
    ZeroMeanObserved,
    EmptyInput,
    UnknownClass,
    Io,
    Format,
};

std::string_view to_string(ErrorCode code);

/// Every library failure surfaces as this exception; `code()` identifies the
/// contract that was violated.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace panelwatch
