#pragma once

#include <stdexcept>
#include <string>

namespace dpdlasso {

enum class ErrorCode {
    DimensionMismatch,
    NonFiniteInput,
    ConstantColumn,
    InvalidArgument,
    NonPositiveSigma,
    GammaZero,
    ZeroWeightInRescaling,
    InvalidSampleSize,
    ZeroTrueCoefficient,
    DegenerateMad,
    EmptyAfterTrim,
    PTooSmall,
    Parse,
    Io,
};

inline const char* to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::ConstantColumn: return "ConstantColumn";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonPositiveSigma: return "NonPositiveSigma";
    case ErrorCode::GammaZero: return "GammaZero";
    case ErrorCode::ZeroWeightInRescaling: return "ZeroWeightInRescaling";
    case ErrorCode::InvalidSampleSize: return "InvalidSampleSize";
    case ErrorCode::ZeroTrueCoefficient: return "ZeroTrueCoefficient";
    case ErrorCode::DegenerateMad: return "DegenerateMad";
    case ErrorCode::EmptyAfterTrim: return "EmptyAfterTrim";
    case ErrorCode::PTooSmall: return "PTooSmall";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

/// Exception carrying a machine-checkable error code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

namespace detail {

[[noreturn]] inline void fail(ErrorCode code, const std::string& what)
{
    throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what)
{
    if (!cond) fail(code, what);
}

} // namespace detail
} // namespace dpdlasso
