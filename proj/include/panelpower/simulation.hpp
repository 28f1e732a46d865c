#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "panelpower/design.hpp"

namespace panelpower {

/// Monte Carlo configuration. Cluster counts must be whole numbers, and so
/// must N when individuals are simulated one by one.
struct SimConfig {
    DesignSpec design;
    ErrorModel error;
    int replications = 1000;
    std::uint64_t seed = 0;
    /// Draw cell means directly instead of averaging N simulated individuals.
    bool aggregate_to_cluster = true;
};

struct ClusterSeries {
    int group = 0;
    bool treated = false;
    std::vector<double> outcome;  // cell mean per period
};

struct Panel {
    std::vector<double> times;
    std::vector<int> start_periods;
    std::vector<ClusterSeries> clusters;

    [[nodiscard]] int periods() const noexcept { return static_cast<int>(times.size()); }
};

/// Seed of the random stream for one (replication, cluster) pair; streams
/// are independent of thread count and evaluation order.
[[nodiscard]] std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t replication, std::uint64_t cluster) noexcept;

/// One replication under a zero treatment effect and zero fixed effects.
[[nodiscard]] Panel simulate_panel(const SimConfig& cfg, int replication);

/// Arm means per timing group: means[k][arm][t], arm 0 = comparison, 1 = treatment.
using ArmMeans = std::vector<std::array<std::vector<double>, 2>>;
[[nodiscard]] ArmMeans arm_means(const Panel& panel);

/// Effect estimates per timing group and post-period with the standard aggregations.
struct EffectGrid {
    int periods = 0;
    std::vector<int> start_periods;
    std::vector<std::vector<double>> effects;  // effects[k][a] at period label S_k + a

    [[nodiscard]] double pooled() const;
    [[nodiscard]] double exposure(int l) const;
    [[nodiscard]] double calendar(int q) const;
    /// Pooled effect as a weighted average of calendar-period effects.
    [[nodiscard]] double pooled_by_calendar() const;
    /// Pooled effect as a weighted average of exposure-time effects.
    [[nodiscard]] double pooled_by_exposure() const;
    [[nodiscard]] double aggregate(const Estimand& e) const;
};

[[nodiscard]] EffectGrid estimate_did(const Panel& panel);
/// Trendline estimators; `its` ignores the comparison arm.
[[nodiscard]] EffectGrid estimate_cits(const Panel& panel, PostModel post, bool its);
[[nodiscard]] double estimate(const Panel& panel, const EstimatorSpec& est);

struct OracleReport {
    EstimatorSpec estimator;
    int replications = 0;
    double empirical_variance = 0.0;
    double closed_form = 0.0;
    double relative_error = 0.0;
    /// Standard error of `empirical_variance` from the fourth central moment.
    double monte_carlo_se = 0.0;
    /// (empirical - closed) / monte_carlo_se.
    double z_score = 0.0;
    double mean_estimate = 0.0;
    double mean_standard_error = 0.0;

    [[nodiscard]] bool within(double relative_tolerance, double max_z) const noexcept;
};

struct OracleRun {
    std::vector<OracleReport> reports;
    std::vector<std::vector<double>> estimates;  // estimates[estimator][replication]
};

/// Simulates `cfg.replications` panels once and evaluates every estimator on them.
/// `threads` = 0 uses the hardware concurrency.
[[nodiscard]] OracleRun oracle_compare(const SimConfig& cfg, const std::vector<EstimatorSpec>& estimators,
                                       unsigned threads = 0);
[[nodiscard]] OracleReport oracle_compare(const SimConfig& cfg, const EstimatorSpec& est);

/// Sample variance statistics, reduced in replication order.
struct SampleMoments {
    double mean = 0.0;
    double variance = 0.0;       // n - 1 denominator
    double variance_se = 0.0;
};
[[nodiscard]] SampleMoments sample_moments(const std::vector<double>& x);

/// One row per replication, one column per estimator.
void write_estimates_csv(std::ostream& out, const std::vector<EstimatorSpec>& estimators, const OracleRun& run);

}  // namespace panelpower
