#include "panelpower/error.hpp"

namespace panelpower {

std::string_view error_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::PeriodRange: return "PERIOD_RANGE";
        case ErrorCode::NonMonotoneTimes: return "NON_MONOTONE_TIMES";
        case ErrorCode::EmptyGroup: return "EMPTY_GROUP";
        case ErrorCode::ItsWithComparisons: return "ITS_WITH_COMPARISONS";
        case ErrorCode::CitsTooFewPeriods: return "CITS_TOO_FEW_PERIODS";
        case ErrorCode::InvalidErrorModel: return "INVALID_ERROR_MODEL";
        case ErrorCode::InvalidInput: return "INVALID_INPUT";
        case ErrorCode::NoGroupIncluded: return "NO_GROUP_INCLUDED";
        case ErrorCode::NotPostPeriod: return "NOT_POST_PERIOD";
        case ErrorCode::DegeneratePeriod: return "DEGENERATE_PERIOD";
        case ErrorCode::R2OutOfRange: return "R2_OUT_OF_RANGE";
        case ErrorCode::NumericGuard: return "NUMERIC_GUARD";
        case ErrorCode::POutOfRange: return "P_OUT_OF_RANGE";
        case ErrorCode::NonpositiveDf: return "NONPOSITIVE_DF";
        case ErrorCode::NoConvergence: return "NO_CONVERGENCE";
        case ErrorCode::SingularFit: return "SINGULAR_FIT";
    }
    return "UNKNOWN";
}

}  // namespace panelpower
