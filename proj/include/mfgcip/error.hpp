#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mfgcip {

/// Machine-readable failure categories. The CLI prints the code name verbatim.
enum class ErrorCode {
    InvalidGrid,
    InvalidArgument,
    InvalidConfig,
    UnknownKernel,
    MaskTouchesBoundary,
    SolverFailure,
    PositivityViolation,
    GradientFloor,
    NonFinite,
    MissingData,
    DatasetMismatch,
    Io,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidGrid: return "INVALID_GRID";
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::InvalidConfig: return "INVALID_CONFIG";
    case ErrorCode::UnknownKernel: return "UNKNOWN_KERNEL";
    case ErrorCode::MaskTouchesBoundary: return "MASK_TOUCHES_BOUNDARY";
    case ErrorCode::SolverFailure: return "SOLVER_FAILURE";
    case ErrorCode::PositivityViolation: return "POSITIVITY_VIOLATION";
    case ErrorCode::GradientFloor: return "GRADIENT_FLOOR";
    case ErrorCode::NonFinite: return "NON_FINITE";
    case ErrorCode::MissingData: return "MISSING_DATA";
    case ErrorCode::DatasetMismatch: return "DATASET_MISMATCH";
    case ErrorCode::Io: return "IO";
    }
    return "UNKNOWN";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) {
        throw Error(code, message);
    }
}

} // namespace mfgcip
