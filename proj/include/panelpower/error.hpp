#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace panelpower {

enum class ErrorCode {
    PeriodRange,
    NonMonotoneTimes,
    EmptyGroup,
    ItsWithComparisons,
    CitsTooFewPeriods,
    InvalidErrorModel,
    InvalidInput,
    NoGroupIncluded,
    NotPostPeriod,
    DegeneratePeriod,
    R2OutOfRange,
    NumericGuard,
    POutOfRange,
    NonpositiveDf,
    NoConvergence,
    SingularFit,
};

/// Wire name of an error code, e.g. "CITS_TOO_FEW_PERIODS".
[[nodiscard]] std::string_view error_name(ErrorCode code) noexcept;

/// Error raised by every validating operation in the engine.
///
/// `field()` names the offending input (JSON key) when one applies, so the
/// service can point the client at a specific form field.
class PanelPowerError : public std::runtime_error {
public:
    PanelPowerError(ErrorCode code, const std::string& message, std::string field = {})
        : std::runtime_error(std::string(error_name(code)) + ": " + message),
          code_(code),
          message_(message),
          field_(std::move(field)) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    [[nodiscard]] const std::string& message() const noexcept { return message_; }
    [[nodiscard]] const std::string& field() const noexcept { return field_; }

private:
    ErrorCode code_;
    std::string message_;
    std::string field_;
};

}  // namespace panelpower
