#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace panelpower {

enum class CorrStructure { AR1, Constant };
enum class DesignKind { CrossSectional, Longitudinal };

enum class Family {
    DID,
    CitsFull,
    CitsDiscrete,
    CitsCommonSlopes,
    ItsFull,
    ItsDiscrete,
    ItsCommonSlopes,
};

/// How the post-period is modelled by a trend-based family.
enum class PostModel { Trendline, Discrete, CommonSlopes };

[[nodiscard]] constexpr bool is_its(Family f) noexcept {
    return f == Family::ItsFull || f == Family::ItsDiscrete || f == Family::ItsCommonSlopes;
}

/// True for every CITS/ITS family (they fit pre-period trendlines).
[[nodiscard]] constexpr bool is_trend_family(Family f) noexcept { return f != Family::DID; }

[[nodiscard]] constexpr PostModel post_model(Family f) noexcept {
    switch (f) {
        case Family::CitsDiscrete:
        case Family::ItsDiscrete: return PostModel::Discrete;
        case Family::CitsCommonSlopes:
        case Family::ItsCommonSlopes: return PostModel::CommonSlopes;
        default: return PostModel::Trendline;
    }
}

enum class EstimandKind { Pooled, Exposure, Calendar };

/// Pooled effect, effect after `l` periods of exposure, or effect at calendar period `q`.
struct Estimand {
    EstimandKind kind = EstimandKind::Pooled;
    int index = 0;  // l for Exposure, q (period label) for Calendar

    [[nodiscard]] static Estimand pooled() { return {}; }
    [[nodiscard]] static Estimand exposure(int l) { return {EstimandKind::Exposure, l}; }
    [[nodiscard]] static Estimand calendar(int q) { return {EstimandKind::Calendar, q}; }

    friend bool operator==(const Estimand&, const Estimand&) = default;
};

struct Covariates {
    double r2_yx = 0.0;
    double r2_tx = 0.0;
    int count = 0;

    friend bool operator==(const Covariates&, const Covariates&) = default;
};

struct EstimatorSpec {
    Family family = Family::DID;
    Estimand estimand;
    std::optional<Covariates> covariates;

    friend bool operator==(const EstimatorSpec&, const EstimatorSpec&) = default;
};

/// A balanced panel design with staggered treatment timing.
///
/// Cluster counts are real-valued so the cluster solver can rescale a
/// design continuously; `start_periods` are period labels in 1..P.
struct DesignSpec {
    int periods = 0;
    std::vector<double> times;  // empty means 1, 2, ..., P
    std::vector<int> start_periods;
    std::vector<double> treated_clusters;
    std::vector<double> comparison_clusters;
    double individuals = 1.0;

    [[nodiscard]] int timing_groups() const noexcept { return static_cast<int>(start_periods.size()); }
    [[nodiscard]] double total_treated() const noexcept;
    [[nodiscard]] double total_comparison() const noexcept;
    [[nodiscard]] double total_clusters() const noexcept { return total_treated() + total_comparison(); }

    friend bool operator==(const DesignSpec&, const DesignSpec&) = default;
};

/// Variance decomposition in effect-size units (total variance normalised to 1).
struct ErrorModel {
    double icc = 0.0;
    CorrStructure structure = CorrStructure::AR1;
    double rho = 0.0;
    DesignKind kind = DesignKind::CrossSectional;
    double psi = 0.0;

    [[nodiscard]] double cluster_variance() const noexcept { return icc; }
    [[nodiscard]] double individual_variance() const noexcept { return 1.0 - icc; }
    /// psi as it enters the formulas: zero for cross-sectional designs.
    [[nodiscard]] double effective_psi() const noexcept {
        return kind == DesignKind::Longitudinal ? psi : 0.0;
    }

    friend bool operator==(const ErrorModel&, const ErrorModel&) = default;
};

/// Centred-time summaries for one timing group.
struct TimeGeometry {
    int pre_periods = 0;   // B_k
    int post_periods = 0;  // A_k
    double mean_time_pre = 0.0;
    double mean_time_post = 0.0;
    double mean_time_full = 0.0;
    double ssqt_pre = 0.0;
    double ssqt_post = 0.0;
    double ssqt_full = 0.0;
    double post_share = 0.0;  // A_k / P
};

[[nodiscard]] TimeGeometry time_geometry(std::span<const double> times, int start_period);

/// A design that has passed the range checks for one estimator.
///
/// Only `validate_design` constructs these; everything downstream may
/// assume the invariants hold.
class ValidatedDesign {
public:
    [[nodiscard]] const DesignSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] const EstimatorSpec& estimator() const noexcept { return estimator_; }
    [[nodiscard]] std::span<const double> times() const noexcept { return spec_.times; }
    [[nodiscard]] int periods() const noexcept { return spec_.periods; }
    [[nodiscard]] int timing_groups() const noexcept { return spec_.timing_groups(); }
    [[nodiscard]] int start_period(int k) const { return spec_.start_periods.at(k); }
    [[nodiscard]] int pre_periods(int k) const { return start_period(k) - 1; }
    [[nodiscard]] int post_periods(int k) const { return spec_.periods - start_period(k) + 1; }
    [[nodiscard]] double treated(int k) const { return spec_.treated_clusters.at(k); }
    [[nodiscard]] double comparison(int k) const { return spec_.comparison_clusters.at(k); }
    [[nodiscard]] int total_post_periods() const noexcept;
    [[nodiscard]] int max_post_periods() const noexcept;

    /// r = M_T / M.
    [[nodiscard]] double treated_share() const noexcept;
    /// p_Tk = M_Tk / M_T.
    [[nodiscard]] double treated_group_share(int k) const;
    /// p_Ck = M_Ck / M_C (zero when there are no comparisons).
    [[nodiscard]] double comparison_group_share(int k) const;

    [[nodiscard]] const std::vector<TimeGeometry>& geometry() const noexcept { return geometry_; }

    /// Same shares, total cluster count rescaled to `total`.
    [[nodiscard]] ValidatedDesign with_total_clusters(double total) const;
    /// Same design validated for a different estimator.
    [[nodiscard]] ValidatedDesign with_estimator(const EstimatorSpec& est) const;

private:
    friend ValidatedDesign validate_design(const DesignSpec&, const EstimatorSpec&);
    ValidatedDesign(DesignSpec spec, EstimatorSpec est);

    DesignSpec spec_;
    EstimatorSpec estimator_;
    std::vector<TimeGeometry> geometry_;
};

/// Range-checks a design for an estimator. Throws PanelPowerError.
[[nodiscard]] ValidatedDesign validate_design(const DesignSpec& spec, const EstimatorSpec& est);

/// Throws INVALID_ERROR_MODEL on out-of-range parameters. `times` is needed
/// because a negative AR(1) coefficient is only defined for integer gaps.
void validate_error_model(const ErrorModel& err, std::span<const double> times);

/// 1, 2, ..., periods.
[[nodiscard]] std::vector<double> default_times(int periods);

/// Is `period` (a label) included in the estimand for a group starting at `start`?
[[nodiscard]] bool includes_group(const Estimand& e, int start_period, int periods) noexcept;

/// Period label at which a point-in-time estimand evaluates group k.
[[nodiscard]] int evaluation_period(const Estimand& e, int start_period) noexcept;

[[nodiscard]] std::string_view family_name(Family f) noexcept;
[[nodiscard]] std::string_view estimand_kind_name(EstimandKind k) noexcept;
/// e.g. "CITS_FULL:EXPOSURE(1)".
[[nodiscard]] std::string estimator_label(const EstimatorSpec& est);

}  // namespace panelpower
