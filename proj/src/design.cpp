#include "panelpower/design.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "panelpower/error.hpp"

namespace panelpower {

namespace {

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

double mean_of(std::span<const double> v) { return sum(v) / static_cast<double>(v.size()); }

double centered_ssq(std::span<const double> v, double centre) {
    double s = 0.0;
    for (double x : v) s += (x - centre) * (x - centre);
    return s;
}

void require(bool ok, ErrorCode code, const std::string& msg, const char* field) {
    if (!ok) throw PanelPowerError(code, msg, field);
}

}  // namespace

double DesignSpec::total_treated() const noexcept { return sum(treated_clusters); }
double DesignSpec::total_comparison() const noexcept { return sum(comparison_clusters); }

std::vector<double> default_times(int periods) {
    std::vector<double> t(static_cast<std::size_t>(std::max(periods, 0)));
    std::iota(t.begin(), t.end(), 1.0);
    return t;
}

TimeGeometry time_geometry(std::span<const double> times, int start_period) {
    const int periods = static_cast<int>(times.size());
    const int pre = start_period - 1;
    const auto pre_times = times.first(static_cast<std::size_t>(pre));
    const auto post_times = times.subspan(static_cast<std::size_t>(pre));

    TimeGeometry g;
    g.pre_periods = pre;
    g.post_periods = periods - pre;
    g.mean_time_pre = pre > 0 ? mean_of(pre_times) : 0.0;
    g.mean_time_post = g.post_periods > 0 ? mean_of(post_times) : 0.0;
    g.mean_time_full = mean_of(times);
    g.ssqt_pre = centered_ssq(pre_times, g.mean_time_pre);
    g.ssqt_post = centered_ssq(post_times, g.mean_time_post);
    g.ssqt_full = centered_ssq(times, g.mean_time_full);
    g.post_share = static_cast<double>(g.post_periods) / periods;
    return g;
}

bool includes_group(const Estimand& e, int start_period, int periods) noexcept {
    switch (e.kind) {
        case EstimandKind::Pooled: return true;
        case EstimandKind::Exposure: return e.index >= 1 && e.index <= periods - start_period + 1;
        case EstimandKind::Calendar: return e.index >= start_period && e.index <= periods;
    }
    return false;
}

int evaluation_period(const Estimand& e, int start_period) noexcept {
    switch (e.kind) {
        case EstimandKind::Exposure: return e.index + start_period - 1;
        case EstimandKind::Calendar: return e.index;
        case EstimandKind::Pooled: break;
    }
    return 0;
}

ValidatedDesign::ValidatedDesign(DesignSpec spec, EstimatorSpec est)
    : spec_(std::move(spec)), estimator_(est) {
    geometry_.reserve(spec_.start_periods.size());
    for (int s : spec_.start_periods) geometry_.push_back(time_geometry(spec_.times, s));
}

int ValidatedDesign::total_post_periods() const noexcept {
    int total = 0;
    for (int k = 0; k < timing_groups(); ++k) total += post_periods(k);
    return total;
}

int ValidatedDesign::max_post_periods() const noexcept {
    int best = 0;
    for (int k = 0; k < timing_groups(); ++k) best = std::max(best, post_periods(k));
    return best;
}

double ValidatedDesign::treated_share() const noexcept {
    return spec_.total_treated() / spec_.total_clusters();
}

double ValidatedDesign::treated_group_share(int k) const {
    return treated(k) / spec_.total_treated();
}

double ValidatedDesign::comparison_group_share(int k) const {
    const double total = spec_.total_comparison();
    return total > 0.0 ? comparison(k) / total : 0.0;
}

ValidatedDesign ValidatedDesign::with_total_clusters(double total) const {
    const double scale = total / spec_.total_clusters();
    DesignSpec scaled = spec_;
    for (double& m : scaled.treated_clusters) m *= scale;
    for (double& m : scaled.comparison_clusters) m *= scale;
    return ValidatedDesign(std::move(scaled), estimator_);
}

ValidatedDesign ValidatedDesign::with_estimator(const EstimatorSpec& est) const {
    return validate_design(spec_, est);
}

ValidatedDesign validate_design(const DesignSpec& input, const EstimatorSpec& est) {
    DesignSpec spec = input;
    require(spec.periods >= 2, ErrorCode::InvalidInput, "at least two periods are required", "P");
    if (spec.times.empty()) spec.times = default_times(spec.periods);
    require(static_cast<int>(spec.times.size()) == spec.periods, ErrorCode::InvalidInput,
            "times must have one entry per period", "times");
    for (std::size_t i = 0; i < spec.times.size(); ++i) {
        require(std::isfinite(spec.times[i]), ErrorCode::InvalidInput, "times must be finite", "times");
        require(i == 0 || spec.times[i] > spec.times[i - 1], ErrorCode::NonMonotoneTimes,
                "measurement times must be strictly increasing", "times");
    }

    const int groups = spec.timing_groups();
    require(groups >= 1, ErrorCode::InvalidInput, "at least one timing group is required", "S");
    require(static_cast<int>(spec.treated_clusters.size()) == groups, ErrorCode::InvalidInput,
            "M_T_k needs one entry per timing group", "M_T_k");
    require(static_cast<int>(spec.comparison_clusters.size()) == groups, ErrorCode::InvalidInput,
            "M_C_k needs one entry per timing group", "M_C_k");
    require(std::isfinite(spec.individuals) && spec.individuals >= 1.0, ErrorCode::InvalidInput,
            "N must be at least 1", "N");

    for (int k = 0; k < groups; ++k) {
        const int s = spec.start_periods[k];
        require(k == 0 || s > spec.start_periods[k - 1], ErrorCode::PeriodRange,
                "start periods must be strictly increasing", "S");
        require(s >= 2 && s <= spec.periods, ErrorCode::PeriodRange,
                "start period " + std::to_string(s) + " outside 2.." + std::to_string(spec.periods), "S");
    }

    if (is_trend_family(est.family)) {
        for (int k = 0; k < groups; ++k) {
            const int pre = spec.start_periods[k] - 1;
            const int post = spec.periods - pre;
            require(pre >= 3 && post >= 3, ErrorCode::CitsTooFewPeriods,
                    "timing group " + std::to_string(k + 1) + " has B=" + std::to_string(pre) +
                        ", A=" + std::to_string(post) + "; trendline estimators need at least 3 of each",
                    "S");
        }
    }

    for (int k = 0; k < groups; ++k) {
        const double mt = spec.treated_clusters[k];
        const double mc = spec.comparison_clusters[k];
        require(std::isfinite(mt) && mt > 0.0, ErrorCode::EmptyGroup,
                "timing group " + std::to_string(k + 1) + " has no treatment clusters", "M_T_k");
        if (is_its(est.family)) {
            require(mc == 0.0, ErrorCode::ItsWithComparisons,
                    "ITS designs cannot have comparison clusters", "M_C_k");
        } else {
            require(std::isfinite(mc) && mc > 0.0, ErrorCode::EmptyGroup,
                    "timing group " + std::to_string(k + 1) + " has no comparison clusters", "M_C_k");
        }
    }

    const Estimand& e = est.estimand;
    if (e.kind == EstimandKind::Calendar) {
        require(e.index >= 1 && e.index <= spec.periods, ErrorCode::InvalidInput,
                "calendar period outside 1..P", "q");
    }
    if (e.kind != EstimandKind::Pooled) {
        const bool any = std::any_of(spec.start_periods.begin(), spec.start_periods.end(),
                                     [&](int s) { return includes_group(e, s, spec.periods); });
        require(any, ErrorCode::NoGroupIncluded, "no timing group is observed at the requested period",
                e.kind == EstimandKind::Exposure ? "l" : "q");
    }

    if (est.covariates) {
        const Covariates& c = *est.covariates;
        require(c.r2_yx >= 0.0 && c.r2_yx < 1.0, ErrorCode::R2OutOfRange, "R2_YX must lie in [0,1)", "R2_YX");
        require(c.r2_tx >= 0.0 && c.r2_tx < 1.0, ErrorCode::R2OutOfRange, "R2_TX must lie in [0,1)", "R2_TX");
        require(c.count >= 0, ErrorCode::InvalidInput, "covariate count must be non-negative", "v");
    }

    return ValidatedDesign(std::move(spec), est);
}

void validate_error_model(const ErrorModel& err, std::span<const double> times) {
    require(err.icc >= 0.0 && err.icc < 1.0, ErrorCode::InvalidErrorModel, "ICC_theta must lie in [0,1)",
            "ICC_theta");
    require(std::abs(err.rho) < 1.0, ErrorCode::InvalidErrorModel, "|rho| must be below 1", "rho");
    require(std::abs(err.psi) < 1.0, ErrorCode::InvalidErrorModel, "|psi| must be below 1", "psi");
    if (err.structure != CorrStructure::AR1) return;
    const bool negative = err.rho < 0.0 || err.effective_psi() < 0.0;
    if (!negative) return;
    for (std::size_t i = 1; i < times.size(); ++i) {
        const double gap = times[i] - times[0];
        require(gap == std::round(gap), ErrorCode::InvalidErrorModel,
                "a negative AR(1) coefficient needs integer time gaps", err.rho < 0.0 ? "rho" : "psi");
    }
}

std::string_view family_name(Family f) noexcept {
    switch (f) {
        case Family::DID: return "DID";
        case Family::CitsFull: return "CITS_FULL";
        case Family::CitsDiscrete: return "CITS_DISCRETE";
        case Family::CitsCommonSlopes: return "CITS_COMMON_SLOPES";
        case Family::ItsFull: return "ITS_FULL";
        case Family::ItsDiscrete: return "ITS_DISCRETE";
        case Family::ItsCommonSlopes: return "ITS_COMMON_SLOPES";
    }
    return "UNKNOWN";
}

std::string_view estimand_kind_name(EstimandKind k) noexcept {
    switch (k) {
        case EstimandKind::Pooled: return "POOLED";
        case EstimandKind::Exposure: return "EXPOSURE";
        case EstimandKind::Calendar: return "CALENDAR";
    }
    return "UNKNOWN";
}

std::string estimator_label(const EstimatorSpec& est) {
    std::string out(family_name(est.family));
    out += ':';
    out += estimand_kind_name(est.estimand.kind);
    if (est.estimand.kind != EstimandKind::Pooled) out += '(' + std::to_string(est.estimand.index) + ')';
    return out;
}

}  // namespace panelpower
