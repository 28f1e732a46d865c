#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "panelpower/error.hpp"
#include "panelpower/simulation.hpp"
#include "panelpower/variance.hpp"

using namespace panelpower;

namespace {

SimConfig base_config(DesignKind kind = DesignKind::CrossSectional) {
    SimConfig cfg;
    cfg.design = fixtures::table3_design();
    cfg.error = fixtures::table3_error(kind);
    cfg.replications = 200;
    cfg.seed = 99;
    return cfg;
}

/// Deterministic panel: each cluster follows `f(group, treated, period label)`.
template <class F>
Panel synthetic(const DesignSpec& d, F f) {
    Panel p;
    p.times = d.times.empty() ? default_times(d.periods) : d.times;
    p.start_periods = d.start_periods;
    for (int k = 0; k < d.timing_groups(); ++k) {
        for (int arm = 1; arm >= 0; --arm) {
            const int n = static_cast<int>(arm ? d.treated_clusters[k] : d.comparison_clusters[k]);
            for (int j = 0; j < n; ++j) {
                ClusterSeries c{k, arm == 1, {}};
                for (int t = 1; t <= d.periods; ++t) c.outcome.push_back(f(k, arm == 1, t, p.times[t - 1]) + 0.1 * j);
                p.clusters.push_back(c);
            }
        }
    }
    return p;
}

const std::vector<EstimatorSpec>& all_estimators() {
    static const std::vector<EstimatorSpec> v = [] {
        std::vector<EstimatorSpec> out;
        for (Family f : fixtures::kAllFamilies)
            for (Estimand e : {Estimand::pooled(), Estimand::exposure(1), Estimand::exposure(3), Estimand::calendar(6),
                               Estimand::calendar(8)})
                out.push_back({f, e, std::nullopt});
        return out;
    }();
    return v;
}

}  // namespace

TEST(Simulation, StreamSeedsAreDistinct) {
    EXPECT_NE(stream_seed(1, 0, 0), stream_seed(1, 0, 1));
    EXPECT_NE(stream_seed(1, 0, 1), stream_seed(1, 1, 0));
    EXPECT_NE(stream_seed(1, 0, 0), stream_seed(2, 0, 0));
    EXPECT_EQ(stream_seed(7, 3, 5), stream_seed(7, 3, 5));
}

TEST(Simulation, Determinism) {
    const SimConfig cfg = base_config();
    const Panel a = simulate_panel(cfg, 17);
    const Panel b = simulate_panel(cfg, 17);
    ASSERT_EQ(a.clusters.size(), 40u);
    for (std::size_t i = 0; i < a.clusters.size(); ++i) EXPECT_EQ(a.clusters[i].outcome, b.clusters[i].outcome);
    EXPECT_NE(simulate_panel(cfg, 18).clusters[0].outcome, a.clusters[0].outcome);
}

TEST(Simulation, ThreadCountDoesNotChangeResults) {
    const SimConfig cfg = base_config(DesignKind::Longitudinal);
    const std::vector<EstimatorSpec> est{{Family::DID, {}, {}}, {Family::CitsFull, Estimand::exposure(1), {}}};
    const OracleRun one = oracle_compare(cfg, est, 1);
    const OracleRun three = oracle_compare(cfg, est, 3);
    EXPECT_EQ(one.estimates, three.estimates);
    EXPECT_EQ(one.reports[0].empirical_variance, three.reports[0].empirical_variance);
}

TEST(Simulation, ClusterOrder) {
    const Panel p = simulate_panel(base_config(), 0);
    EXPECT_TRUE(p.clusters[0].treated);
    EXPECT_EQ(p.clusters[0].group, 0);
    EXPECT_FALSE(p.clusters[10].treated);
    EXPECT_EQ(p.clusters[20].group, 1);
    EXPECT_TRUE(p.clusters[20].treated);
}

TEST(Simulation, ZeroPsiLongitudinalIsCrossSectional) {
    for (bool aggregate : {true, false}) {
        SimConfig cross = base_config();
        cross.aggregate_to_cluster = aggregate;
        cross.design.individuals = 5;
        SimConfig longi = cross;
        longi.error.kind = DesignKind::Longitudinal;
        longi.error.psi = 0.0;
        const Panel a = simulate_panel(cross, 3);
        const Panel b = simulate_panel(longi, 3);
        for (std::size_t i = 0; i < a.clusters.size(); ++i) EXPECT_EQ(a.clusters[i].outcome, b.clusters[i].outcome);
    }
}

TEST(Simulation, LagCorrelationsAndStationarity) {
    SimConfig cfg;
    cfg.design = {6, {1, 2, 3, 5, 6, 7}, {4}, {20000}, {0}, 1.0};
    cfg.error = {0.999999, CorrStructure::AR1, 0.6, DesignKind::CrossSectional, 0.0};
    const Panel p = simulate_panel(cfg, 0);
    const auto cov = [&](int a, int b) {
        double s = 0;
        for (const auto& c : p.clusters) s += c.outcome[a] * c.outcome[b];
        return s / static_cast<double>(p.clusters.size());
    };
    const double tol = 4.0 / std::sqrt(20000.0);
    for (int t = 0; t < 6; ++t) EXPECT_NEAR(cov(t, t), 1.0, 3 * tol);
    EXPECT_NEAR(cov(0, 1) / std::sqrt(cov(0, 0) * cov(1, 1)), 0.6, tol);
    EXPECT_NEAR(cov(0, 2) / std::sqrt(cov(0, 0) * cov(2, 2)), 0.36, tol);
    // Times 3 and 5 are two units apart.
    EXPECT_NEAR(cov(2, 3) / std::sqrt(cov(2, 2) * cov(3, 3)), 0.36, tol);
}

TEST(Simulation, ConstantStructureCorrelations) {
    SimConfig cfg;
    cfg.design = {5, {}, {3}, {20000}, {0}, 1.0};
    cfg.error = {0.999999, CorrStructure::Constant, 0.3, DesignKind::CrossSectional, 0.0};
    const Panel p = simulate_panel(cfg, 0);
    double s04 = 0, s00 = 0;
    for (const auto& c : p.clusters) {
        s04 += c.outcome[0] * c.outcome[4];
        s00 += c.outcome[0] * c.outcome[0];
    }
    EXPECT_NEAR(s04 / s00, 0.3, 4.0 / std::sqrt(20000.0));
}

TEST(Simulation, CellVarianceMatchesModel) {
    SimConfig cfg;
    cfg.design = {3, {}, {2}, {4000}, {0}, 20.0};
    cfg.error = {0.3, CorrStructure::AR1, 0.5, DesignKind::Longitudinal, 0.5};
    cfg.aggregate_to_cluster = false;
    const Panel p = simulate_panel(cfg, 1);
    double s00 = 0, s01 = 0;
    for (const auto& c : p.clusters) {
        s00 += c.outcome[0] * c.outcome[0];
        s01 += c.outcome[0] * c.outcome[1];
    }
    const double n = 4000;
    EXPECT_NEAR(s00 / n, 0.3 + 0.7 / 20, 0.04);
    EXPECT_NEAR(s01 / n, 0.5 * (0.3 + 0.7 / 20), 0.04);
}

TEST(Estimators, ZeroNoiseAndInjectedEffect) {
    const DesignSpec d = fixtures::table3_design();
    // Group effects, arm effects, common period shocks and a linear trend.
    const auto base = [](int k, bool treated, int t, double time) {
        return 2.0 * k + (treated ? 1.5 : -0.5) + std::sin(3.0 * t) + (treated ? 0.3 : 0.0) * time;
    };
    const double delta = 0.7;
    const Panel clean = synthetic(d, [&](int k, bool tr, int t, double time) { return base(k, tr, t, time); });
    const Panel treated = synthetic(d, [&](int k, bool tr, int t, double time) {
        return base(k, tr, t, time) + (tr && t >= d.start_periods[k] ? delta : 0.0);
    });
    for (const auto& est : all_estimators()) {
        // The arm-specific slope breaks parallel trends (DID) and ITS sees it as signal.
        if (est.family == Family::DID || is_its(est.family)) continue;
        EXPECT_NEAR(estimate(clean, est), 0.0, 1e-11) << estimator_label(est);
        EXPECT_NEAR(estimate(treated, est), delta, 1e-11) << estimator_label(est);
    }
    const Panel parallel = synthetic(d, [&](int k, bool tr, int t, double) {
        return 2.0 * k + (tr ? 1.0 : 0.0) + std::sin(3.0 * t) + (tr && t >= d.start_periods[k] ? delta : 0.0);
    });
    for (Estimand e : {Estimand::pooled(), Estimand::exposure(2), Estimand::calendar(7)})
        EXPECT_NEAR(estimate(parallel, {Family::DID, e, {}}), delta, 1e-12);
}

TEST(Estimators, ItsRecoversEffectOnTrend) {
    const DesignSpec d = fixtures::its_version(fixtures::table3_design());
    const Panel p = synthetic(d, [&](int k, bool, int t, double time) {
        return 1.0 + 0.25 * time - 0.1 * k + (t >= d.start_periods[k] ? 0.9 : 0.0);
    });
    for (Family f : {Family::ItsFull, Family::ItsDiscrete, Family::ItsCommonSlopes})
        for (Estimand e : {Estimand::pooled(), Estimand::exposure(3), Estimand::calendar(8)})
            EXPECT_NEAR(estimate(p, {f, e, {}}), 0.9, 1e-11);
}

TEST(Estimators, PooledAggregationsAgree) {
    const Panel p = simulate_panel(base_config(), 5);
    for (const EffectGrid& g : {estimate_did(p), estimate_cits(p, PostModel::Trendline, false),
                                estimate_cits(p, PostModel::Discrete, true)}) {
        EXPECT_NEAR(g.pooled(), g.pooled_by_calendar(), 1e-13);
        EXPECT_NEAR(g.pooled(), g.pooled_by_exposure(), 1e-13);
    }
}

TEST(Estimators, FullAndDiscretePooledCoincide) {
    for (int rep = 0; rep < 5; ++rep) {
        const Panel p = simulate_panel(base_config(DesignKind::Longitudinal), rep);
        EXPECT_NEAR(estimate(p, {Family::CitsFull, {}, {}}), estimate(p, {Family::CitsDiscrete, {}, {}}), 1e-13);
        EXPECT_NEAR(estimate(p, {Family::ItsFull, {}, {}}), estimate(p, {Family::ItsDiscrete, {}, {}}), 1e-13);
    }
}

TEST(Estimators, EmptyArmsRejected) {
    const Panel p = simulate_panel(
        [] {
            SimConfig c = base_config();
            c.design = fixtures::its_version(c.design);
            return c;
        }(),
        0);
    EXPECT_THROW((void)estimate(p, {Family::DID, {}, {}}), PanelPowerError);
    EXPECT_THROW((void)estimate(p, {Family::CitsFull, {}, {}}), PanelPowerError);
    EXPECT_NO_THROW((void)estimate(p, {Family::ItsFull, {}, {}}));
}

TEST(Oracle, SmallRunAgreesWithClosedForm) {
    SimConfig cfg = base_config();
    cfg.replications = 2000;
    const auto run = oracle_compare(cfg, {{Family::DID, {}, {}}, {Family::CitsCommonSlopes, {}, {}}}, 2);
    for (const auto& r : run.reports) {
        EXPECT_LT(std::abs(r.z_score), 4.0);
        EXPECT_NEAR(r.mean_estimate, 0.0, 5 * r.mean_standard_error);
        EXPECT_EQ(r.replications, 2000);
    }
}

TEST(Oracle, ConfigValidation) {
    SimConfig cfg = base_config();
    cfg.design.treated_clusters = {10.5, 10};
    EXPECT_THROW((void)simulate_panel(cfg, 0), PanelPowerError);
    cfg = base_config();
    cfg.aggregate_to_cluster = false;
    cfg.design.individuals = 10.5;
    EXPECT_THROW((void)simulate_panel(cfg, 0), PanelPowerError);
    cfg = base_config();
    cfg.replications = 1;
    EXPECT_THROW((void)oracle_compare(cfg, {Family::DID, {}, {}}), PanelPowerError);
    EXPECT_THROW((void)oracle_compare(base_config(), {Family::DID, {}, Covariates{0.1, 0.1, 1}}), PanelPowerError);
}

TEST(Oracle, MomentsAndCsv) {
    const SampleMoments m = sample_moments({1.0, 2.0, 3.0, 4.0});
    EXPECT_DOUBLE_EQ(m.mean, 2.5);
    EXPECT_DOUBLE_EQ(m.variance, 5.0 / 3.0);
    // m4 = (2*5.0625 + 2*0.0625)/4 = 2.5625; (m4 - s^4 * 1/3) / 4
    EXPECT_NEAR(m.variance_se, std::sqrt((2.5625 - 25.0 / 9.0 / 3.0) / 4.0), 1e-15);

    OracleRun run;
    run.estimates = {{0.5, -0.25}, {1.0, 2.0}};
    std::ostringstream out;
    write_estimates_csv(out, {{Family::DID, {}, {}}, {Family::ItsFull, Estimand::exposure(2), {}}}, run);
    EXPECT_EQ(out.str(), "replication,DID:POOLED,ITS_FULL:EXPOSURE(2)\n0,0.5,1\n1,-0.25,2\n");

    OracleReport r;
    r.relative_error = 0.049;
    r.z_score = -3.9;
    EXPECT_TRUE(r.within(0.05, 4.0));
    r.z_score = 4.1;
    EXPECT_FALSE(r.within(0.05, 4.0));
}
