#pragma once

#include <span>

#include "panelpower/design.hpp"

namespace panelpower {

/// Correlation between two periods of the same cluster (or person).
struct Correlation {
    CorrStructure structure = CorrStructure::AR1;
    double coefficient = 0.0;

    /// Indices are 0-based positions into `times`.
    [[nodiscard]] double between(std::span<const double> times, std::size_t i, std::size_t j) const;
};

/// Unweighted averages over pre-period pairs, post-period pairs, and
/// pre/post cross pairs. Undefined averages (one pre or post period) are 0.
struct BasicAverages {
    double pre = 0.0;
    double post = 0.0;
    double pre_post = 0.0;
};

/// Centred-time weighted averages used by the trendline estimators.
struct TrendTerms {
    double pre1 = 0.0;
    double pre2 = 0.0;
    double pre_post1 = 0.0;
    double post1 = 0.0;
    double post2 = 0.0;
    double pre_post2 = 0.0;
    double pre_post3 = 0.0;
    double pre_post4 = 0.0;
    double full1 = 0.0;
    double full2 = 0.0;
    double full3 = 0.0;
};

[[nodiscard]] BasicAverages basic_averages(std::span<const double> times, int start_period, const Correlation& c);

/// Average correlation between the pre-periods and one post-period `period`
/// (a label). Throws NOT_POST_PERIOD when `period` is not a post-period.
[[nodiscard]] double point_in_time_pre_post(std::span<const double> times, int start_period, const Correlation& c,
                                            int period);

/// Centred-pre-time weighted correlation between the pre-periods and one
/// post-period; the single-period counterpart of `TrendTerms::pre_post1`.
[[nodiscard]] double point_in_time_pre_post1(std::span<const double> times, int start_period, const Correlation& c,
                                             int period);

/// Throws DEGENERATE_PERIOD when the group has fewer than two pre- or post-periods.
[[nodiscard]] TrendTerms trend_weighted_terms(std::span<const double> times, int start_period, const Correlation& c);

}  // namespace panelpower
