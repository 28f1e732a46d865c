#pragma once

#include <optional>
#include <string>
#include <vector>

#include "panelpower/design.hpp"
#include "panelpower/variance.hpp"

namespace panelpower {

/// Two-tailed test at level `alpha` with power `power`.
struct PowerQuery {
    double alpha = 0.05;
    double power = 0.80;

    friend bool operator==(const PowerQuery&, const PowerQuery&) = default;
};

struct SolverStep {
    int iteration = 0;
    double clusters = 0.0;  // continuous candidate produced by this step
    double df = 0.0;        // df the step's factor was evaluated at (0 for the normal-limit start)
    double factor = 0.0;
};

struct PowerResult {
    std::optional<double> mde;
    /// Total clusters (treatment clusters only for ITS families).
    std::optional<int> clusters;
    double clusters_continuous = 0.0;
    /// Per-group counts from rounding each share of `clusters` up; informational.
    std::vector<int> treated_allocation;
    std::vector<int> comparison_allocation;
    double df = 0.0;
    double factor = 0.0;
    VarianceBreakdown variance;
    std::vector<SolverStep> trace;
    std::vector<std::string> warnings;
};

void validate_query(const PowerQuery& q);

/// T^-1(1 - alpha/2, df) + T^-1(power, df).
[[nodiscard]] double factor(double alpha, double power, double df);
/// The df -> infinity limit of `factor`.
[[nodiscard]] double normal_factor(double alpha, double power);

/// Cluster-time observations minus model parameters (and covariates) for the
/// design's estimator. Real-valued because point-in-time cluster counts may be
/// fractional while solving. Throws NONPOSITIVE_DF.
[[nodiscard]] double degrees_of_freedom(const ValidatedDesign& d);

/// Caveats attached to the df rule for this estimator.
[[nodiscard]] std::vector<std::string> df_warnings(const EstimatorSpec& est);

/// MDE in effect-size units at the design's cluster counts.
[[nodiscard]] PowerResult mde(const ValidatedDesign& d, const ErrorModel& err, const PowerQuery& q);

/// Smallest total cluster count, keeping the design's allocation shares,
/// whose MDE does not exceed `target`.
[[nodiscard]] PowerResult required_clusters(const ValidatedDesign& d, const ErrorModel& err, const PowerQuery& q,
                                            double target);

/// Ratio of continuous required cluster counts, design a over reference b.
[[nodiscard]] double design_effect(const ValidatedDesign& a, const ErrorModel& err_a, const ValidatedDesign& b,
                                   const ErrorModel& err_b, const PowerQuery& q, double target = 0.20);

}  // namespace panelpower
