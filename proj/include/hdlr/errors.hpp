#pragma once

#include <stdexcept>
#include <string>

namespace hdlr {

enum class ErrorCode {
    // Input problems (CLI exit code 2).
    InvalidArgument,
    DimensionMismatch,
    RankDeficient,
    NotEstimable,
    NonPositiveLambda,
    DomainViolation,
    MismatchedLambda,
    UnsupportedOrder,
    ParseError,
    // Numerical failures (CLI exit code 3).
    EigenFailure,
    PoleHit,
    DegenerateTransform,
    InversionFailure,
    LpInfeasible,
    LpUnbounded,
    EmptyMeasure,
    NoRoot,
    NonConvergence,
    InitFailure,
    SingularDenominator,
    BetaOutOfRange,
    AllPointsFailed,
};

const char* to_string(ErrorCode code);

inline bool is_input_error(ErrorCode code) {
    return code <= ErrorCode::ParseError;
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace hdlr
