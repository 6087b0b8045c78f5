#pragma once

#include <stdexcept>
#include <string>

namespace ecf {

enum class ErrorCode {
    // shape arithmetic
    NonDivisibleStride,
    NegativeExtent,
    PoolTooLarge,
    ShapeMismatch,
    // network
    InvalidSpec,
    StaleCache,
    EmptyDataset,
    LayerOutOfRange,
    // svr
    DegenerateInput,
    NonFinite,
    DimensionMismatch,
    // metrics
    LengthMismatch,
    Empty,
    ZeroTarget,
    ZeroMean,
    // data / persistence
    ParseError,
    MissingColumn,
    NonNumeric,
    SplitTooLarge,
    ConstantColumn,
    VersionMismatch,
    CorruptFile,
    // pipeline
    InputTooShort,
    InvalidExtractionLayer,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::NonDivisibleStride: return "NonDivisibleStride";
        case ErrorCode::NegativeExtent: return "NegativeExtent";
        case ErrorCode::PoolTooLarge: return "PoolTooLarge";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::InvalidSpec: return "InvalidSpec";
        case ErrorCode::StaleCache: return "StaleCache";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::LayerOutOfRange: return "LayerOutOfRange";
        case ErrorCode::DegenerateInput: return "DegenerateInput";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::Empty: return "Empty";
        case ErrorCode::ZeroTarget: return "ZeroTarget";
        case ErrorCode::ZeroMean: return "ZeroMean";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::MissingColumn: return "MissingColumn";
        case ErrorCode::NonNumeric: return "NonNumeric";
        case ErrorCode::SplitTooLarge: return "SplitTooLarge";
        case ErrorCode::ConstantColumn: return "ConstantColumn";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::CorruptFile: return "CorruptFile";
        case ErrorCode::InputTooShort: return "InputTooShort";
        case ErrorCode::InvalidExtractionLayer: return "InvalidExtractionLayer";
    }
    return "UnknownError";
}

/// Library-wide exception; carries a machine-checkable code next to the message.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace ecf
