#include "panelpower/reproduction.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "panelpower/error.hpp"
#include "panelpower/power.hpp"

namespace panelpower {

namespace {

constexpr std::optional<int> NA = std::nullopt;

Table3Row row(std::string panel, int P, int s1, int s2, CorrStructure cs, DesignKind kind, Estimand e,
              std::array<std::optional<int>, 5> values) {
    return {std::move(panel), P, {s1, s2}, cs, kind, e, values};
}

}  // namespace

const std::vector<Table3Row>& table3_rows() {
    static const std::vector<Table3Row> rows = [] {
        const auto AR = CorrStructure::AR1;
        const auto CONST = CorrStructure::Constant;
        const auto XS = DesignKind::CrossSectional;
        const auto LONG = DesignKind::Longitudinal;
        const Estimand pooled = Estimand::pooled();
        std::vector<Table3Row> r;
        const std::string p = "pooled";
        r.push_back(row(p, 8, 2, 4, AR, XS, pooled, {48, NA, NA, NA, NA}));
        r.push_back(row(p, 8, 4, 6, AR, XS, pooled, {37, 297, 74, 89, 22}));
        r.push_back(row(p, 12, 4, 8, AR, XS, pooled, {32, 641, 160, 68, 17}));
        r.push_back(row(p, 12, 6, 8, AR, XS, pooled, {27, 181, 45, 71, 18}));
        r.push_back(row(p, 12, 6, 10, AR, XS, pooled, {31, 222, 56, 79, 20}));
        r.push_back(row(p, 12, 8, 10, AR, XS, pooled, {29, 97, 24, 72, 18}));
        r.push_back(row(p, 16, 8, 10, AR, XS, pooled, {21, 138, 35, 61, 15}));
        const std::string c = "pooled, constant autocorrelation";
        r.push_back(row(c, 8, 4, 6, CONST, XS, pooled, {18, 226, 57, 62, 16}));
        r.push_back(row(c, 12, 6, 8, CONST, XS, pooled, {11, 101, 25, 41, 10}));
        const std::string l = "pooled, longitudinal";
        r.push_back(row(l, 12, 6, 8, AR, LONG, pooled, {29, 187, 47, 73, 18}));
        r.push_back(row(l, 12, 6, 10, AR, LONG, pooled, {34, 228, 57, 81, 20}));

        const std::array<std::array<std::array<std::optional<int>, 5>, 7>, 3> point = {{
            {{{58, NA, NA, NA, NA},
              {54, 95, 24, 83, 21},
              {53, 89, 22, 65, 16},
              {52, 74, 19, 70, 18},
              {52, 72, 18, 65, 16},
              {51, 67, 17, 65, 16},
              {51, 62, 16, 60, 15}}},
            {{{78, NA, NA, NA, NA},
              {65, 268, 67, 83, 21},
              {63, 219, 55, 65, 16},
              {60, 127, 32, 70, 18},
              {59, 131, 33, 65, 16},
              {57, 106, 27, 65, 16},
              {57, 86, 22, 60, 15}}},
            {{{82, NA, NA, NA, NA},
              {141, 1604, 401, 167, 42},
              {65, 474, 119, 65, 16},
              {61, 250, 63, 70, 18},
              {126, 591, 148, 139, 35},
              {118, 410, 103, 139, 35},
              {58, 141, 35, 60, 15}}},
        }};
        const std::array<std::array<int, 3>, 7> designs = {{
            {8, 2, 4}, {8, 4, 6}, {12, 4, 8}, {12, 6, 8}, {12, 6, 10}, {12, 8, 10}, {16, 8, 10}}};
        const std::array<int, 3> exposures = {1, 3, 5};
        for (std::size_t e = 0; e < exposures.size(); ++e) {
            const std::string panel = std::to_string(exposures[e]) + " period(s) after exposure";
            for (std::size_t d = 0; d < designs.size(); ++d) {
                r.push_back(row(panel, designs[d][0], designs[d][1], designs[d][2], AR, XS,
                                Estimand::exposure(exposures[e]), point[e][d]));
            }
        }
        return r;
    }();
    return rows;
}

std::vector<Table3Cell> reproduce_table3(int tolerance) {
    std::vector<Table3Cell> cells;
    const auto& rows = table3_rows();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Table3Row& r = rows[i];
        for (std::size_t f = 0; f < kTable3Families.size(); ++f) {
            Table3Cell cell;
            cell.row = i;
            cell.family = kTable3Families[f];
            cell.published = r.published[f];
            const Scenario s = table3_scenario(r.periods, r.starts, r.structure, r.kind, cell.family, r.estimand);
            try {
                const PowerResult res =
                    required_clusters(validate_design(s.design, s.estimator), s.error, s.query, s.mde_target);
                cell.computed = res.clusters;
                cell.continuous = res.clusters_continuous;
            } catch (const PanelPowerError& e) {
                cell.error_code = std::string(error_name(e.code()));
            }
            if (cell.published) {
                cell.pass = cell.computed && std::abs(*cell.computed - *cell.published) <= tolerance;
            } else {
                cell.pass = cell.error_code == error_name(ErrorCode::CitsTooFewPeriods);
            }
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

DesignEffectGrid design_effect_grid(const std::vector<double>& rhos, const std::vector<std::pair<int, int>>& pairs,
                                    int periods, double reference_rho, bool staggered) {
    DesignEffectGrid grid;
    const PowerQuery q;
    const EstimatorSpec did{Family::DID, Estimand::pooled(), std::nullopt};
    for (const auto& [s1, s2] : pairs) {
        const int ref_start = static_cast<int>(std::lround((s1 + s2) / 2.0));
        DesignSpec ref{periods, {}, {ref_start}, {20.0}, {20.0}, 100.0};
        const ValidatedDesign reference = validate_design(ref, did);
        const ErrorModel ref_err{0.05, CorrStructure::AR1, reference_rho, DesignKind::CrossSectional, 0.0};
        const ValidatedDesign design =
            staggered ? validate_design({periods, {}, {s1, s2}, {10.0, 10.0}, {10.0, 10.0}, 100.0}, did) : reference;
        for (double rho : rhos) {
            const ErrorModel err{0.05, CorrStructure::AR1, rho, DesignKind::CrossSectional, 0.0};
            DesignEffectPoint pt;
            pt.rho = rho;
            pt.starts = staggered ? std::vector<int>{s1, s2} : std::vector<int>{ref_start};
            pt.reference_start = ref_start;
            pt.design_effect = design_effect(design, err, reference, ref_err, q);
            grid.points.push_back(std::move(pt));
        }
    }
    if (!grid.points.empty()) {
        const auto [lo, hi] = std::minmax_element(grid.points.begin(), grid.points.end(),
                                                  [](const auto& a, const auto& b) { return a.design_effect < b.design_effect; });
        grid.min = lo->design_effect;
        grid.max = hi->design_effect;
        double sum = 0.0;
        for (const auto& p : grid.points) sum += p.design_effect;
        grid.mean = sum / static_cast<double>(grid.points.size());
    }
    return grid;
}

std::vector<double> default_rho_grid() {
    std::vector<double> r;
    for (int i = 0; i <= 9; ++i) r.push_back(i / 10.0);
    return r;
}

std::vector<std::pair<int, int>> default_start_pairs() { return {{2, 4}, {4, 6}, {2, 6}, {3, 5}}; }

}  // namespace panelpower
