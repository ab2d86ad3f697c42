#include "hdlr/errors.hpp"

namespace hdlr {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::RankDeficient: return "RankDeficient";
        case ErrorCode::NotEstimable: return "NotEstimable";
        case ErrorCode::NonPositiveLambda: return "NonPositiveLambda";
        case ErrorCode::DomainViolation: return "DomainViolation";
        case ErrorCode::MismatchedLambda: return "MismatchedLambda";
        case ErrorCode::UnsupportedOrder: return "UnsupportedOrder";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::EigenFailure: return "EigenFailure";
        case ErrorCode::PoleHit: return "PoleHit";
        case ErrorCode::DegenerateTransform: return "DegenerateTransform";
        case ErrorCode::InversionFailure: return "InversionFailure";
        case ErrorCode::LpInfeasible: return "LpInfeasible";
        case ErrorCode::LpUnbounded: return "LpUnbounded";
        case ErrorCode::EmptyMeasure: return "EmptyMeasure";
        case ErrorCode::NoRoot: return "NoRoot";
        case ErrorCode::NonConvergence: return "NonConvergence";
        case ErrorCode::InitFailure: return "InitFailure";
        case ErrorCode::SingularDenominator: return "SingularDenominator";
        case ErrorCode::BetaOutOfRange: return "BetaOutOfRange";
        case ErrorCode::AllPointsFailed: return "AllPointsFailed";
    }
    return "Unknown";
}

}  // namespace hdlr
