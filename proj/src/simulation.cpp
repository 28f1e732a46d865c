#include "panelpower/simulation.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <random>
#include <thread>

#include "panelpower/error.hpp"
#include "panelpower/variance.hpp"

namespace panelpower {

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Stationary Gaussian series with unit-lag structure given by `coefficient`.
class SeriesGenerator {
public:
    SeriesGenerator(std::span<const double> times, CorrStructure structure, double coefficient, double sd)
        : structure_(structure), sd_(sd), lag_(times.size(), 0.0), innovation_(times.size(), sd) {
        const std::size_t P = times.size();
        if (structure == CorrStructure::AR1) {
            for (std::size_t t = 1; t < P; ++t) {
                lag_[t] = std::pow(coefficient, times[t] - times[t - 1]);
                innovation_[t] = sd * std::sqrt(1.0 - lag_[t] * lag_[t]);
            }
            return;
        }
        Eigen::MatrixXd r = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(P),
                                                      coefficient);
        r.diagonal().setOnes();
        Eigen::LLT<Eigen::MatrixXd> llt(r);
        if (llt.info() != Eigen::Success) {
            throw PanelPowerError(ErrorCode::InvalidErrorModel,
                                  "constant correlation matrix is not positive definite", "rho");
        }
        chol_ = llt.matrixL();
    }

    template <class Rng>
    void draw(Rng& rng, std::normal_distribution<double>& normal, double* out) const {
        const std::size_t P = lag_.size();
        if (structure_ == CorrStructure::AR1) {
            out[0] = sd_ * normal(rng);
            for (std::size_t t = 1; t < P; ++t) out[t] = lag_[t] * out[t - 1] + innovation_[t] * normal(rng);
            return;
        }
        z_.resize(P);
        for (std::size_t t = 0; t < P; ++t) z_[t] = normal(rng);
        for (std::size_t t = 0; t < P; ++t) {
            double acc = 0.0;
            for (std::size_t j = 0; j <= t; ++j) acc += chol_(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) * z_[j];
            out[t] = sd_ * acc;
        }
    }

private:
    CorrStructure structure_;
    double sd_;
    std::vector<double> lag_;
    std::vector<double> innovation_;
    Eigen::MatrixXd chol_;
    mutable std::vector<double> z_;
};

bool is_whole(double x) { return std::isfinite(x) && x == std::round(x); }

void validate_config(const SimConfig& cfg) {
    if (cfg.replications < 2)
        throw PanelPowerError(ErrorCode::InvalidInput, "at least two replications are required", "replications");
    const DesignSpec& d = cfg.design;
    for (double m : d.treated_clusters)
        if (!is_whole(m) || m < 0) throw PanelPowerError(ErrorCode::InvalidInput, "simulated cluster counts must be whole", "M_T_k");
    for (double m : d.comparison_clusters)
        if (!is_whole(m) || m < 0) throw PanelPowerError(ErrorCode::InvalidInput, "simulated cluster counts must be whole", "M_C_k");
    if (!cfg.aggregate_to_cluster && !is_whole(d.individuals))
        throw PanelPowerError(ErrorCode::InvalidInput, "individual-level simulation needs a whole N", "N");
}

DesignSpec with_times(DesignSpec d) {
    if (d.times.empty()) d.times = default_times(d.periods);
    return d;
}

struct Fit {
    double mean_time;
    double mean_y;
    double slope;
    double ssqt;
    double cross;
    [[nodiscard]] double at(double t) const { return mean_y + slope * (t - mean_time); }
};

Fit fit_line(std::span<const double> times, std::span<const double> y) {
    const double n = static_cast<double>(times.size());
    double mt = 0.0, my = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        mt += times[i];
        my += y[i];
    }
    mt /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        sxx += (times[i] - mt) * (times[i] - mt);
        sxy += (times[i] - mt) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw PanelPowerError(ErrorCode::SingularFit, "trend fit needs distinct measurement times", "times");
    return {mt, my, sxy / sxx, sxx, sxy};
}

// Neumaier-compensated sum.
class Accumulator {
public:
    void add(double x) {
        const double t = sum_ + x;
        comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
        sum_ = t;
    }
    [[nodiscard]] double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t replication, std::uint64_t cluster) noexcept {
    return splitmix64(splitmix64(splitmix64(seed) ^ replication) ^ (cluster * 0xD1B54A32D192ED03ULL));
}

Panel simulate_panel(const SimConfig& cfg, int replication) {
    validate_config(cfg);
    const DesignSpec d = with_times(cfg.design);
    validate_error_model(cfg.error, d.times);
    const std::size_t P = d.times.size();

    const double cell_var = cfg.error.individual_variance() / (cfg.aggregate_to_cluster ? d.individuals : 1.0);
    const SeriesGenerator theta(d.times, cfg.error.structure, cfg.error.rho, std::sqrt(cfg.error.cluster_variance()));
    const SeriesGenerator eps(d.times, cfg.error.structure, cfg.error.effective_psi(), std::sqrt(cell_var));
    const int people = cfg.aggregate_to_cluster ? 1 : static_cast<int>(d.individuals);

    Panel panel;
    panel.times = d.times;
    panel.start_periods = d.start_periods;
    std::vector<double> cell(P), person(P);
    std::uint64_t index = 0;
    for (int k = 0; k < d.timing_groups(); ++k) {
        for (int arm = 1; arm >= 0; --arm) {
            const double count = arm == 1 ? d.treated_clusters[k] : d.comparison_clusters[k];
            for (int j = 0; j < static_cast<int>(count); ++j, ++index) {
                std::mt19937_64 rng(stream_seed(cfg.seed, static_cast<std::uint64_t>(replication), index));
                std::normal_distribution<double> normal;
                ClusterSeries series{k, arm == 1, std::vector<double>(P)};
                theta.draw(rng, normal, series.outcome.data());
                std::fill(cell.begin(), cell.end(), 0.0);
                for (int i = 0; i < people; ++i) {
                    eps.draw(rng, normal, person.data());
                    for (std::size_t t = 0; t < P; ++t) cell[t] += person[t];
                }
                for (std::size_t t = 0; t < P; ++t) series.outcome[t] += cell[t] / people;
                panel.clusters.push_back(std::move(series));
            }
        }
    }
    return panel;
}

ArmMeans arm_means(const Panel& panel) {
    const std::size_t P = panel.times.size();
    ArmMeans means(panel.start_periods.size());
    std::vector<std::array<int, 2>> counts(panel.start_periods.size(), {0, 0});
    for (auto& g : means) g = {std::vector<double>(P, 0.0), std::vector<double>(P, 0.0)};
    for (const ClusterSeries& c : panel.clusters) {
        auto& m = means[static_cast<std::size_t>(c.group)][c.treated ? 1 : 0];
        for (std::size_t t = 0; t < P; ++t) m[t] += c.outcome[t];
        ++counts[static_cast<std::size_t>(c.group)][c.treated ? 1 : 0];
    }
    for (std::size_t k = 0; k < means.size(); ++k)
        for (int arm = 0; arm < 2; ++arm) {
            if (counts[k][arm] == 0) {
                means[k][arm].clear();
                continue;
            }
            for (double& v : means[k][arm]) v /= counts[k][arm];
        }
    return means;
}

double EffectGrid::pooled() const {
    double sum = 0.0;
    double weight = 0.0;
    for (const auto& row : effects) {
        for (double v : row) sum += v;
        weight += static_cast<double>(row.size());
    }
    return sum / weight;
}

double EffectGrid::exposure(int l) const {
    double sum = 0.0;
    int n = 0;
    for (const auto& row : effects) {
        if (l < 1 || l > static_cast<int>(row.size())) continue;
        sum += row[static_cast<std::size_t>(l - 1)];
        ++n;
    }
    if (n == 0) throw PanelPowerError(ErrorCode::NoGroupIncluded, "no group has that exposure", "l");
    return sum / n;
}

double EffectGrid::calendar(int q) const {
    double sum = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < effects.size(); ++k) {
        const int a = q - start_periods[k];
        if (a < 0 || a >= static_cast<int>(effects[k].size())) continue;
        sum += effects[k][static_cast<std::size_t>(a)];
        ++n;
    }
    if (n == 0) throw PanelPowerError(ErrorCode::NoGroupIncluded, "no group is treated in that period", "q");
    return sum / n;
}

double EffectGrid::pooled_by_calendar() const {
    double sum = 0.0;
    double weight = 0.0;
    for (int q = *std::min_element(start_periods.begin(), start_periods.end()); q <= periods; ++q) {
        double w = 0.0;
        for (int s : start_periods) w += q >= s ? 1.0 : 0.0;
        sum += w * calendar(q);
        weight += w;
    }
    return sum / weight;
}

double EffectGrid::pooled_by_exposure() const {
    std::size_t longest = 0;
    for (const auto& row : effects) longest = std::max(longest, row.size());
    double sum = 0.0;
    double weight = 0.0;
    for (int l = 1; l <= static_cast<int>(longest); ++l) {
        double w = 0.0;
        for (const auto& row : effects) w += l <= static_cast<int>(row.size()) ? 1.0 : 0.0;
        sum += w * exposure(l);
        weight += w;
    }
    return sum / weight;
}

double EffectGrid::aggregate(const Estimand& e) const {
    switch (e.kind) {
        case EstimandKind::Pooled: return pooled();
        case EstimandKind::Exposure: return exposure(e.index);
        case EstimandKind::Calendar: return calendar(e.index);
    }
    return 0.0;
}

EffectGrid estimate_did(const Panel& panel) {
    const ArmMeans means = arm_means(panel);
    EffectGrid grid{panel.periods(), panel.start_periods, {}};
    for (std::size_t k = 0; k < means.size(); ++k) {
        const auto& treat = means[k][1];
        const auto& comp = means[k][0];
        if (treat.empty() || comp.empty())
            throw PanelPowerError(ErrorCode::EmptyGroup, "DID needs treatment and comparison clusters in every group");
        const int pre = panel.start_periods[k] - 1;
        double pre_t = 0.0, pre_c = 0.0;
        for (int b = 0; b < pre; ++b) {
            pre_t += treat[static_cast<std::size_t>(b)];
            pre_c += comp[static_cast<std::size_t>(b)];
        }
        pre_t /= pre;
        pre_c /= pre;
        std::vector<double> row;
        for (int q = pre; q < panel.periods(); ++q)
            row.push_back((treat[static_cast<std::size_t>(q)] - pre_t) - (comp[static_cast<std::size_t>(q)] - pre_c));
        grid.effects.push_back(std::move(row));
    }
    return grid;
}

namespace {

// Deviation of one arm's post-period outcomes from its pre-period trend.
std::vector<double> arm_deviation(std::span<const double> times, std::span<const double> y, int pre, PostModel post) {
    const std::size_t b = static_cast<std::size_t>(pre);
    const auto pre_t = times.first(b);
    const auto post_t = times.subspan(b);
    const auto pre_y = y.first(b);
    const auto post_y = y.subspan(b);
    const Fit before = fit_line(pre_t, pre_y);
    std::vector<double> dev(post_t.size());
    if (post == PostModel::CommonSlopes) {
        const Fit after = fit_line(post_t, post_y);
        const double slope = (before.cross + after.cross) / (before.ssqt + after.ssqt);
        const double jump = (after.mean_y - before.mean_y) - slope * (after.mean_time - before.mean_time);
        std::fill(dev.begin(), dev.end(), jump);
        return dev;
    }
    if (post == PostModel::Discrete) {
        for (std::size_t a = 0; a < post_t.size(); ++a) dev[a] = post_y[a] - before.at(post_t[a]);
        return dev;
    }
    const Fit after = fit_line(post_t, post_y);
    for (std::size_t a = 0; a < post_t.size(); ++a) dev[a] = after.at(post_t[a]) - before.at(post_t[a]);
    return dev;
}

}  // namespace

EffectGrid estimate_cits(const Panel& panel, PostModel post, bool its) {
    const ArmMeans means = arm_means(panel);
    EffectGrid grid{panel.periods(), panel.start_periods, {}};
    for (std::size_t k = 0; k < means.size(); ++k) {
        const int pre = panel.start_periods[k] - 1;
        if (means[k][1].empty() || (!its && means[k][0].empty()))
            throw PanelPowerError(ErrorCode::EmptyGroup, "a timing group has an empty arm");
        std::vector<double> row = arm_deviation(panel.times, means[k][1], pre, post);
        if (!its) {
            const std::vector<double> comp = arm_deviation(panel.times, means[k][0], pre, post);
            for (std::size_t a = 0; a < row.size(); ++a) row[a] -= comp[a];
        }
        grid.effects.push_back(std::move(row));
    }
    return grid;
}

double estimate(const Panel& panel, const EstimatorSpec& est) {
    if (est.family == Family::DID) return estimate_did(panel).aggregate(est.estimand);
    return estimate_cits(panel, post_model(est.family), is_its(est.family)).aggregate(est.estimand);
}

bool OracleReport::within(double relative_tolerance, double max_z) const noexcept {
    return relative_error < relative_tolerance && std::abs(z_score) <= max_z;
}

SampleMoments sample_moments(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    Accumulator s1;
    for (double v : x) s1.add(v);
    SampleMoments m;
    m.mean = s1.value() / n;
    Accumulator s2, s4;
    for (double v : x) {
        const double d = v - m.mean;
        s2.add(d * d);
        s4.add(d * d * d * d);
    }
    m.variance = s2.value() / (n - 1.0);
    const double m4 = s4.value() / n;
    const double s = m.variance;
    m.variance_se = std::sqrt(std::max(0.0, (m4 - s * s * (n - 3.0) / (n - 1.0)) / n));
    return m;
}

OracleRun oracle_compare(const SimConfig& cfg, const std::vector<EstimatorSpec>& estimators, unsigned threads) {
    validate_config(cfg);
    std::vector<double> closed;
    for (const EstimatorSpec& est : estimators) {
        if (est.covariates) throw PanelPowerError(ErrorCode::InvalidInput, "covariates are not simulated", "covariates");
        DesignSpec d = cfg.design;
        if (is_its(est.family)) std::fill(d.comparison_clusters.begin(), d.comparison_clusters.end(), 0.0);
        closed.push_back(variance(validate_design(d, est), cfg.error).total);
    }

    const int reps = cfg.replications;
    OracleRun run;
    run.estimates.assign(estimators.size(), std::vector<double>(static_cast<std::size_t>(reps)));
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(reps));

    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&](unsigned worker) {
        try {
            for (int rep = static_cast<int>(worker); rep < reps; rep += static_cast<int>(threads)) {
                const Panel panel = simulate_panel(cfg, rep);
                for (std::size_t e = 0; e < estimators.size(); ++e)
                    run.estimates[e][static_cast<std::size_t>(rep)] = estimate(panel, estimators[e]);
            }
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    for (std::size_t e = 0; e < estimators.size(); ++e) {
        const SampleMoments m = sample_moments(run.estimates[e]);
        OracleReport r;
        r.estimator = estimators[e];
        r.replications = reps;
        r.empirical_variance = m.variance;
        r.closed_form = closed[e];
        r.relative_error = closed[e] > 0.0 ? std::abs(m.variance - closed[e]) / closed[e] : std::abs(m.variance);
        r.monte_carlo_se = m.variance_se;
        r.z_score = m.variance_se > 0.0 ? (m.variance - closed[e]) / m.variance_se : 0.0;
        r.mean_estimate = m.mean;
        r.mean_standard_error = std::sqrt(m.variance / reps);
        run.reports.push_back(r);
    }
    return run;
}

OracleReport oracle_compare(const SimConfig& cfg, const EstimatorSpec& est) {
    return oracle_compare(cfg, std::vector<EstimatorSpec>{est}).reports.front();
}

void write_estimates_csv(std::ostream& out, const std::vector<EstimatorSpec>& estimators, const OracleRun& run) {
    out << "replication";
    for (const auto& e : estimators) out << ',' << estimator_label(e);
    out << '\n';
    const std::size_t reps = run.estimates.empty() ? 0 : run.estimates.front().size();
    out.precision(17);
    for (std::size_t r = 0; r < reps; ++r) {
        out << r;
        for (const auto& col : run.estimates) out << ',' << col[r];
        out << '\n';
    }
}

}  // namespace panelpower
