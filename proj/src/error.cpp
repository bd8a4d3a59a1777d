#include "panelwatch/error.hpp"

namespace panelwatch {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MalformedHeader: return "MalformedHeader";
        case ErrorCode::MalformedRow: return "MalformedRow";
        case ErrorCode::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
        case ErrorCode::NegativePower: return "NegativePower";
        case ErrorCode::AllMissing: return "AllMissing";
        case ErrorCode::InsufficientOverlap: return "InsufficientOverlap";
        case ErrorCode::UnknownPanel: return "UnknownPanel";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::SingularDesign: return "SingularDesign";
        case ErrorCode::MissingInputPanel: return "MissingInputPanel";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::InsufficientHistory: return "InsufficientHistory";
        case ErrorCode::NoWeatherOverlap: return "NoWeatherOverlap";
        case ErrorCode::WeatherGap: return "WeatherGap";
        case ErrorCode::TooFewPanels: return "TooFewPanels";
        case ErrorCode::NoCleanModel: return "NoCleanModel";
        case ErrorCode::NotFlagged: return "NotFlagged";
        case ErrorCode::ClassTooSmall: return "ClassTooSmall";
        case ErrorCode::ZeroMeanObserved: return "ZeroMeanObserved";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::UnknownClass: return "UnknownClass";
        case ErrorCode::Io: return "Io";
        case ErrorCode::Format: return "Format";
    }
    return "Unknown";
}

}  // namespace panelwatch
