#pragma once

#include <stdexcept>
#include <string>

namespace noisyor {

enum class ErrorCode {
    InvalidArgument,
    IndexOutOfRange,
    EmptySymptomSet,
    TensorOrderCap,
    NegativeTensorEntry,
    SingularSlice,
    DegenerateEigen,
    OutOfRange,
    ZeroDenominator,
    DegeneratePair,
    InfluenceUnderflow,
    PreconditionViolation,
    RequestMismatch,
    UnknownSet,
    EmptyStore,
    WidthMismatch,
    InfeasibleDegree,
    EnumerationCap,
    StructureMismatch,
    NoValidAnchor,
    GridSearchFailed,
    IoError,
    ParseError,
};

inline const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::EmptySymptomSet: return "EmptySymptomSet";
        case ErrorCode::TensorOrderCap: return "TensorOrderCap";
        case ErrorCode::NegativeTensorEntry: return "NegativeTensorEntry";
        case ErrorCode::SingularSlice: return "SingularSlice";
        case ErrorCode::DegenerateEigen: return "DegenerateEigen";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::ZeroDenominator: return "ZeroDenominator";
        case ErrorCode::DegeneratePair: return "DegeneratePair";
        case ErrorCode::InfluenceUnderflow: return "InfluenceUnderflow";
        case ErrorCode::PreconditionViolation: return "PreconditionViolation";
        case ErrorCode::RequestMismatch: return "RequestMismatch";
        case ErrorCode::UnknownSet: return "UnknownSet";
        case ErrorCode::EmptyStore: return "EmptyStore";
        case ErrorCode::WidthMismatch: return "WidthMismatch";
        case ErrorCode::InfeasibleDegree: return "InfeasibleDegree";
        case ErrorCode::EnumerationCap: return "EnumerationCap";
        case ErrorCode::StructureMismatch: return "StructureMismatch";
        case ErrorCode::NoValidAnchor: return "NoValidAnchor";
        case ErrorCode::GridSearchFailed: return "GridSearchFailed";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::ParseError: return "ParseError";
    }
    return "UnknownError";
}

/// Library-wide exception; carries a machine-readable code plus a message.
class NoisyOrError : public std::runtime_error {
public:
    NoisyOrError(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw NoisyOrError(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition)
        fail(code, message);
}

}  // namespace noisyor
