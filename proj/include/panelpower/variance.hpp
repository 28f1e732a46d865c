#pragma once

#include <map>
#include <string>
#include <vector>

#include "panelpower/design.hpp"

namespace panelpower {

/// Closed-form estimator variance in effect-size units, with the
/// intermediate quantities that produced it.
struct VarianceBreakdown {
    double total = 0.0;
    double theta_block = 0.0;    // cluster-time error share of `total`
    double epsilon_block = 0.0;  // individual error share of `total`
    std::vector<double> per_group;
    std::vector<double> weights;
    /// Per-group named quantities (one entry per timing group).
    std::map<std::string, std::vector<double>> terms;
    double covariate_factor = 1.0;
};

[[nodiscard]] VarianceBreakdown var_did(const ValidatedDesign& d, const ErrorModel& err, const Estimand& e);

/// Fully interacted CITS (or ITS when `its` is set). `post` selects the
/// trendline or per-period-indicator post model; both share the pooled variance.
[[nodiscard]] VarianceBreakdown var_cits_full(const ValidatedDesign& d, const ErrorModel& err, const Estimand& e,
                                              bool its, PostModel post = PostModel::Trendline);

[[nodiscard]] VarianceBreakdown var_cits_common_slopes(const ValidatedDesign& d, const ErrorModel& err,
                                                       const Estimand& e, bool its);

/// Scales every block by (1 - R2_YX) / (1 - R2_TX).
[[nodiscard]] VarianceBreakdown apply_covariates(VarianceBreakdown v, const Covariates& cov);

/// Variance for the estimator the design was validated against, covariates included.
[[nodiscard]] VarianceBreakdown variance(const ValidatedDesign& d, const ErrorModel& err);

}  // namespace panelpower
