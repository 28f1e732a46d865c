#include "panelpower/variance.hpp"

#include <string>

#include "panelpower/autocorrelation.hpp"
#include "panelpower/error.hpp"

namespace panelpower {

namespace {

class TermRecorder {
public:
    TermRecorder(std::map<std::string, std::vector<double>>& terms, int groups) : terms_(terms), groups_(groups) {}

    void at(int k) { k_ = k; }
    void put(const std::string& name, double value) {
        auto& v = terms_[name];
        if (v.empty()) v.assign(static_cast<std::size_t>(groups_), 0.0);
        v[static_cast<std::size_t>(k_)] = value;
    }

private:
    std::map<std::string, std::vector<double>>& terms_;
    int groups_;
    int k_ = 0;
};

// Which error process a bracket is evaluated for: "rho" for the
// cluster-time errors, "psi" for the individual errors.
struct Process {
    Correlation corr;
    std::string tag;
};

double did_pooled_bracket(const TimeGeometry& g, const BasicAverages& avg) {
    const double A = g.post_periods;
    const double B = g.pre_periods;
    return 1.0 / A + 1.0 / B + (A - 1.0) / A * avg.post + (B - 1.0) / B * avg.pre - 2.0 * avg.pre_post;
}

double did_point_bracket(const TimeGeometry& g, const BasicAverages& avg, double pre_post_at) {
    const double B = g.pre_periods;
    return 1.0 + 1.0 / B + (B - 1.0) / B * avg.pre - 2.0 * pre_post_at;
}

// Pre-period trendline forecast error at distance `gap` from the pre-period mean time.
struct ForecastTerms {
    double t1, t2, t3;
};

ForecastTerms pre_forecast_terms(const TimeGeometry& g, double gap, double pre1, double pre2, double pre_post1) {
    const double B = g.pre_periods;
    const double sp = g.ssqt_pre;
    return {gap * gap * (1.0 / sp + (B - 1.0) * B * pre1 / (sp * sp)), 2.0 * gap * B * pre2 / sp,
            2.0 * gap * B * pre_post1 / sp};
}

class Engine {
public:
    Engine(const ValidatedDesign& d, const ErrorModel& err, const Estimand& e, bool its)
        : d_(d), err_(err), e_(e), its_(its) {
        validate_error_model(err, d.times());
        const int groups = d.timing_groups();
        if (e.kind == EstimandKind::Calendar && (e.index < 1 || e.index > d.periods())) {
            throw PanelPowerError(ErrorCode::InvalidInput, "calendar period outside 1..P", "q");
        }
        bool any = false;
        for (int k = 0; k < groups; ++k) any = any || includes_group(e, d.start_period(k), d.periods());
        if (!any) {
            throw PanelPowerError(ErrorCode::NoGroupIncluded, "no timing group is observed at the requested period",
                                  e.kind == EstimandKind::Exposure ? "l" : "q");
        }
        theta_.corr = {err.structure, err.rho};
        theta_.tag = "rho";
        eps_.corr = {err.structure, err.effective_psi()};
        eps_.tag = "psi";
        out_.per_group.assign(static_cast<std::size_t>(groups), 0.0);
        out_.weights.assign(static_cast<std::size_t>(groups), 0.0);
    }

    void require_trend_periods() const {
        for (int k = 0; k < d_.timing_groups(); ++k) {
            if (d_.pre_periods(k) < 3 || d_.post_periods(k) < 3) {
                throw PanelPowerError(ErrorCode::CitsTooFewPeriods,
                                      "trendline estimators need at least 3 pre- and 3 post-periods per group", "S");
            }
        }
    }

    // `bracket(k, process, recorder)` returns the per-group bracket for one error process.
    template <class Bracket>
    VarianceBreakdown run(Bracket&& bracket) {
        TermRecorder rec(out_.terms, d_.timing_groups());
        const bool pooled = e_.kind == EstimandKind::Pooled;
        double weight_sum = 0.0;
        double theta_sum = 0.0;
        double eps_sum = 0.0;
        for (int k = 0; k < d_.timing_groups(); ++k) {
            const std::size_t ks = static_cast<std::size_t>(k);
            if (!includes_group(e_, d_.start_period(k), d_.periods())) continue;
            rec.at(k);
            const double w = pooled ? static_cast<double>(d_.post_periods(k)) : 1.0;
            const double m = 1.0 / d_.treated(k) + (its_ ? 0.0 : 1.0 / d_.comparison(k));
            const double theta = bracket(k, theta_, rec);
            const double eps = bracket(k, eps_, rec);
            const double theta_part = m * err_.cluster_variance() * theta;
            const double eps_part = m * err_.individual_variance() / d_.spec().individuals * eps;
            rec.put("cluster_factor", m);
            rec.put("theta_bracket", theta);
            rec.put("epsilon_bracket", eps);
            out_.weights[ks] = w;
            out_.per_group[ks] = theta_part + eps_part;
            weight_sum += w;
            theta_sum += w * w * theta_part;
            eps_sum += w * w * eps_part;
        }
        const double norm = weight_sum * weight_sum;
        out_.theta_block = theta_sum / norm;
        out_.epsilon_block = eps_sum / norm;
        out_.total = out_.theta_block + out_.epsilon_block;
        if (out_.total < -1e-9) {
            throw PanelPowerError(ErrorCode::NumericGuard,
                                  "closed-form variance is negative (" + std::to_string(out_.total) + ")");
        }
        if (out_.total < 0.0) out_.total = 0.0;
        return std::move(out_);
    }

    const ValidatedDesign& design() const { return d_; }
    const Estimand& estimand() const { return e_; }

private:
    const ValidatedDesign& d_;
    const ErrorModel& err_;
    Estimand e_;
    bool its_;
    Process theta_;
    Process eps_;
    VarianceBreakdown out_;
};

void record_geometry(TermRecorder& rec, const TimeGeometry& g) {
    rec.put("SSQT_pre", g.ssqt_pre);
    rec.put("SSQT_post", g.ssqt_post);
    rec.put("SSQT_full", g.ssqt_full);
    rec.put("mean_time_pre", g.mean_time_pre);
    rec.put("mean_time_post", g.mean_time_post);
}

void record_basic(TermRecorder& rec, const std::string& tag, const BasicAverages& avg) {
    rec.put(tag + "_pre", avg.pre);
    rec.put(tag + "_post", avg.post);
    rec.put(tag + "_pre_post", avg.pre_post);
}

void record_trend(TermRecorder& rec, const std::string& tag, const TrendTerms& t) {
    rec.put(tag + "_pre1", t.pre1);
    rec.put(tag + "_pre2", t.pre2);
    rec.put(tag + "_pre_post1", t.pre_post1);
    rec.put(tag + "_post1", t.post1);
    rec.put(tag + "_post2", t.post2);
    rec.put(tag + "_pre_post2", t.pre_post2);
    rec.put(tag + "_pre_post3", t.pre_post3);
    rec.put(tag + "_pre_post4", t.pre_post4);
}

}  // namespace

VarianceBreakdown var_did(const ValidatedDesign& d, const ErrorModel& err, const Estimand& e) {
    Engine engine(d, err, e, false);
    const auto times = d.times();
    return engine.run([&](int k, const Process& proc, TermRecorder& rec) {
        const int s = d.start_period(k);
        const TimeGeometry& g = d.geometry()[static_cast<std::size_t>(k)];
        const BasicAverages avg = basic_averages(times, s, proc.corr);
        record_basic(rec, proc.tag, avg);
        if (e.kind == EstimandKind::Pooled) return did_pooled_bracket(g, avg);
        const double at = point_in_time_pre_post(times, s, proc.corr, evaluation_period(e, s));
        rec.put(proc.tag + "_pre_post_at", at);
        return did_point_bracket(g, avg, at);
    });
}

VarianceBreakdown var_cits_full(const ValidatedDesign& d, const ErrorModel& err, const Estimand& e, bool its,
                                PostModel post) {
    Engine engine(d, err, e, its);
    engine.require_trend_periods();
    const auto times = d.times();
    const bool pooled = e.kind == EstimandKind::Pooled;
    const bool discrete = post == PostModel::Discrete;
    return engine.run([&](int k, const Process& proc, TermRecorder& rec) {
        const int s = d.start_period(k);
        const TimeGeometry& g = d.geometry()[static_cast<std::size_t>(k)];
        const std::string& tag = proc.tag;
        const std::string suffix = tag == "rho" ? "" : "_psi";
        const BasicAverages avg = basic_averages(times, s, proc.corr);
        const TrendTerms tt = trend_weighted_terms(times, s, proc.corr);
        record_basic(rec, tag, avg);
        record_trend(rec, tag, tt);
        record_geometry(rec, g);

        if (pooled) {
            const double gap = g.mean_time_post - g.mean_time_pre;
            const ForecastTerms f = pre_forecast_terms(g, gap, tt.pre1, tt.pre2, tt.pre_post1);
            rec.put("Term1" + suffix, f.t1);
            rec.put("Term2" + suffix, f.t2);
            rec.put("Term3" + suffix, f.t3);
            if (tag == "psi") rec.put("Term4", gap * gap / g.ssqt_pre);
            return did_pooled_bracket(g, avg) + f.t1 + f.t2 - f.t3;
        }

        const int q = evaluation_period(e, s);
        const double tq = times[static_cast<std::size_t>(q - 1)];
        const double from_pre = tq - g.mean_time_pre;

        if (discrete) {
            const double at = point_in_time_pre_post(times, s, proc.corr, q);
            const double at1 = point_in_time_pre_post1(times, s, proc.corr, q);
            rec.put(tag + "_pre_post_at", at);
            rec.put(tag + "_pre_post1_at", at1);
            const ForecastTerms f = pre_forecast_terms(g, from_pre, tt.pre1, tt.pre2, at1);
            rec.put("Term1" + suffix, f.t1);
            rec.put("Term2" + suffix, f.t2);
            rec.put("Term3" + suffix, f.t3);
            return did_point_bracket(g, avg, at) + f.t1 + f.t2 - f.t3;
        }

        const double A = g.post_periods;
        const double B = g.pre_periods;
        const double sq = g.ssqt_post;
        const double sp = g.ssqt_pre;
        const double from_post = tq - g.mean_time_post;
        const double t1 = from_post * from_post * (1.0 / sq + (A - 1.0) * A * tt.post1 / (sq * sq));
        const double t2 = from_pre * from_pre * (1.0 / sp + (B - 1.0) * B * tt.pre1 / (sp * sp));
        const double t3 = 2.0 * from_post * A * tt.post2 / sq;
        const double t4 = 2.0 * from_pre * B * tt.pre2 / sp;
        const double t5 = 2.0 * from_post * A * tt.pre_post2 / sq;
        const double t6 = 2.0 * from_pre * B * tt.pre_post3 / sp;
        const double t7 = 2.0 * from_pre * from_post * A * B * tt.pre_post4 / (sq * sp);
        rec.put("Term1e" + suffix, t1);
        rec.put("Term2e" + suffix, t2);
        rec.put("Term3e" + suffix, t3);
        rec.put("Term4e" + suffix, t4);
        rec.put("Term5e" + suffix, t5);
        rec.put("Term6e" + suffix, t6);
        rec.put("Term7e" + suffix, t7);
        if (tag == "psi") {
            rec.put("Term8e", from_post * from_post / sq);
            rec.put("Term9e", from_pre * from_pre / sp);
        }
        return did_pooled_bracket(g, avg) + t1 + t2 + t3 + t4 - t5 - t6 - t7;
    });
}

VarianceBreakdown var_cits_common_slopes(const ValidatedDesign& d, const ErrorModel& err, const Estimand& e,
                                         bool its) {
    Engine engine(d, err, e, its);
    engine.require_trend_periods();
    const auto times = d.times();
    const double P = d.periods();
    return engine.run([&](int k, const Process& proc, TermRecorder& rec) {
        const int s = d.start_period(k);
        const TimeGeometry& g = d.geometry()[static_cast<std::size_t>(k)];
        const std::string suffix = proc.tag == "rho" ? "" : "_psi";
        const TrendTerms tt = trend_weighted_terms(times, s, proc.corr);
        rec.put(proc.tag + "_full1", tt.full1);
        rec.put(proc.tag + "_full2", tt.full2);
        rec.put(proc.tag + "_full3", tt.full3);
        record_geometry(rec, g);

        const double A = g.post_periods;
        const double B = g.pre_periods;
        const double inv = 1.0 / A + 1.0 / B;
        const double within = g.ssqt_pre + g.ssqt_post;
        const double ratio = g.ssqt_full / within;
        const double shift = (g.mean_time_post - g.mean_time_pre) / within;
        const double t1 = ratio;
        const double t2 = inv * P * (P - 1.0) * ratio * ratio * tt.full1;
        const double t3 = 2.0 * P * (P - 1.0) * ratio * shift * tt.full2;
        const double t4 = A * B * (P - 1.0) * shift * shift * tt.full3;
        rec.put("Term1CS", t1);
        rec.put("Term2CS" + suffix, t2);
        rec.put("Term3CS" + suffix, t3);
        rec.put("Term4CS" + suffix, t4);
        return inv * (t1 + t2 - t3 + t4);
    });
}

VarianceBreakdown apply_covariates(VarianceBreakdown v, const Covariates& cov) {
    if (!(cov.r2_yx >= 0.0 && cov.r2_yx < 1.0))
        throw PanelPowerError(ErrorCode::R2OutOfRange, "R2_YX must lie in [0,1)", "R2_YX");
    if (!(cov.r2_tx >= 0.0 && cov.r2_tx < 1.0))
        throw PanelPowerError(ErrorCode::R2OutOfRange, "R2_TX must lie in [0,1)", "R2_TX");
    const double f = (1.0 - cov.r2_yx) / (1.0 - cov.r2_tx);
    v.total *= f;
    v.theta_block *= f;
    v.epsilon_block *= f;
    for (double& x : v.per_group) x *= f;
    v.covariate_factor *= f;
    return v;
}

VarianceBreakdown variance(const ValidatedDesign& d, const ErrorModel& err) {
    const EstimatorSpec& est = d.estimator();
    const bool its = is_its(est.family);
    VarianceBreakdown v;
    switch (post_model(est.family)) {
        case PostModel::Trendline:
            v = est.family == Family::DID ? var_did(d, err, est.estimand)
                                          : var_cits_full(d, err, est.estimand, its, PostModel::Trendline);
            break;
        case PostModel::Discrete: v = var_cits_full(d, err, est.estimand, its, PostModel::Discrete); break;
        case PostModel::CommonSlopes: v = var_cits_common_slopes(d, err, est.estimand, its); break;
    }
    if (est.covariates) v = apply_covariates(std::move(v), *est.covariates);
    return v;
}

}  // namespace panelpower
