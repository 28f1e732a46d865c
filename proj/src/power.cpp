#include "panelpower/power.hpp"

#include <cmath>
#include <string>

#include "panelpower/error.hpp"
#include "panelpower/student_t.hpp"

namespace panelpower {

namespace {

constexpr int kMaxIterations = 100;
constexpr double kRelativeTolerance = 1e-10;

double mde_at(const ValidatedDesign& d, const ErrorModel& err, const PowerQuery& q) {
    return factor(q.alpha, q.power, degrees_of_freedom(d)) * std::sqrt(variance(d, err).total);
}

}  // namespace

void validate_query(const PowerQuery& q) {
    if (!(q.alpha > 0.0 && q.alpha < 1.0))
        throw PanelPowerError(ErrorCode::POutOfRange, "alpha must lie in (0,1)", "alpha");
    if (!(q.power > 0.0 && q.power < 1.0))
        throw PanelPowerError(ErrorCode::POutOfRange, "power must lie in (0,1)", "lambda");
}

double factor(double alpha, double power, double df) {
    return inverse_student_t(1.0 - alpha / 2.0, df) + inverse_student_t(power, df);
}

double normal_factor(double alpha, double power) {
    return normal_quantile(1.0 - alpha / 2.0) + normal_quantile(power);
}

double degrees_of_freedom(const ValidatedDesign& d) {
    const EstimatorSpec& est = d.estimator();
    const bool pooled = est.estimand.kind == EstimandKind::Pooled;
    const double P = d.periods();

    double clusters = 0.0;
    double groups = 0.0;
    double post = 0.0;
    for (int k = 0; k < d.timing_groups(); ++k) {
        if (!pooled && !includes_group(est.estimand, d.start_period(k), d.periods())) continue;
        clusters += d.treated(k) + d.comparison(k);
        groups += 1.0;
        post += d.post_periods(k);
    }

    double df = 0.0;
    switch (est.family) {
        case Family::DID:
            df = pooled ? clusters * P - clusters - groups * P - post : clusters * P - clusters - groups * P - groups;
            break;
        case Family::CitsFull: df = clusters * P - 8.0 * groups; break;
        case Family::ItsFull: df = clusters * P - 4.0 * groups; break;
        case Family::CitsDiscrete: df = clusters * P - 4.0 * groups - post; break;
        case Family::ItsDiscrete: df = clusters * P - 2.0 * groups - post; break;
        case Family::CitsCommonSlopes:
        case Family::ItsCommonSlopes: {
            // Same model whatever the estimand: every group's parameters are estimated.
            double all = 0.0;
            for (int k = 0; k < d.timing_groups(); ++k) all += d.treated(k) + d.comparison(k);
            const double per_group = est.family == Family::CitsCommonSlopes ? 6.0 : 3.0;
            df = all * P - per_group * d.timing_groups();
            break;
        }
    }
    if (est.covariates) df -= est.covariates->count;
    if (!(df > 0.0)) {
        throw PanelPowerError(ErrorCode::NonpositiveDf,
                              "degrees of freedom " + std::to_string(df) + " are not positive; the design is too small",
                              "M");
    }
    return df;
}

std::vector<std::string> df_warnings(const EstimatorSpec& est) {
    std::vector<std::string> out;
    if (is_its(est.family)) {
        out.emplace_back("ITS_DF_ASSUMED: ITS degrees of freedom count the parameters of the treatment-only model");
    }
    if (post_model(est.family) == PostModel::Discrete && est.estimand.kind != EstimandKind::Pooled) {
        out.emplace_back(
            "DISCRETE_POINT_DF_ASSUMED: point-in-time discrete df restrict the pooled rule to included groups");
    }
    return out;
}

PowerResult mde(const ValidatedDesign& d, const ErrorModel& err, const PowerQuery& q) {
    validate_query(q);
    PowerResult r;
    r.variance = variance(d, err);
    r.df = degrees_of_freedom(d);
    r.factor = factor(q.alpha, q.power, r.df);
    r.mde = r.factor * std::sqrt(r.variance.total);
    r.clusters_continuous = d.spec().total_clusters();
    r.warnings = df_warnings(d.estimator());
    return r;
}

PowerResult required_clusters(const ValidatedDesign& d, const ErrorModel& err, const PowerQuery& q, double target) {
    validate_query(q);
    if (!(target > 0.0 && std::isfinite(target)))
        throw PanelPowerError(ErrorCode::InvalidInput, "target MDE must be positive", "mde_target");

    // Every variance term scales as 1/M once shares are fixed.
    const double unit_variance = variance(d.with_total_clusters(1.0), err).total;
    const double scale = unit_variance / (target * target);

    PowerResult r;
    double f = normal_factor(q.alpha, q.power);
    double m = f * f * scale;
    r.trace.push_back({0, m, 0.0, f});
    bool converged = false;
    for (int it = 1; it <= kMaxIterations; ++it) {
        const double df = degrees_of_freedom(d.with_total_clusters(m));
        f = factor(q.alpha, q.power, df);
        const double next = f * f * scale;
        r.trace.push_back({it, next, df, f});
        const bool done = std::abs(next - m) <= kRelativeTolerance * std::max(1.0, m);
        m = next;
        if (done) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw PanelPowerError(ErrorCode::NoConvergence,
                              "cluster solver did not settle within " + std::to_string(kMaxIterations) + " iterations");
    }
    r.clusters_continuous = m;

    int total = std::max(1, static_cast<int>(std::ceil(m - 1e-9)));
    while (mde_at(d.with_total_clusters(total), err, q) > target) ++total;
    while (total > 1 && mde_at(d.with_total_clusters(total - 1), err, q) <= target) --total;

    const ValidatedDesign final_design = d.with_total_clusters(total);
    r.clusters = total;
    r.variance = variance(final_design, err);
    r.df = degrees_of_freedom(final_design);
    r.factor = factor(q.alpha, q.power, r.df);
    r.mde = r.factor * std::sqrt(r.variance.total);
    for (int k = 0; k < d.timing_groups(); ++k) {
        r.treated_allocation.push_back(static_cast<int>(std::ceil(final_design.treated(k) - 1e-9)));
        r.comparison_allocation.push_back(static_cast<int>(std::ceil(final_design.comparison(k) - 1e-9)));
    }
    r.warnings = df_warnings(d.estimator());
    return r;
}

double design_effect(const ValidatedDesign& a, const ErrorModel& err_a, const ValidatedDesign& b,
                     const ErrorModel& err_b, const PowerQuery& q, double target) {
    return required_clusters(a, err_a, q, target).clusters_continuous /
           required_clusters(b, err_b, q, target).clusters_continuous;
}

}  // namespace panelpower
