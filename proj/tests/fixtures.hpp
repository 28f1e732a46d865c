#pragma once

#include <vector>

#include "panelpower/design.hpp"
#include "panelpower/power.hpp"

namespace fixtures {

using namespace panelpower;

/// P=8, S=(4,6), 10/10 clusters per group, N=100.
inline DesignSpec table3_design() { return {8, {}, {4, 6}, {10, 10}, {10, 10}, 100.0}; }

inline ErrorModel table3_error(DesignKind kind = DesignKind::CrossSectional) {
    return {0.05, CorrStructure::AR1, 0.4, kind, 0.4};
}

inline DesignSpec its_version(DesignSpec d) {
    d.comparison_clusters.assign(d.start_periods.size(), 0.0);
    return d;
}

/// Twelve designs with B_k, A_k >= 3 everywhere so every family applies;
/// uneven cluster counts and irregular time spacing are mixed in.
struct GridDesign {
    DesignSpec design;
    double icc;
};

inline std::vector<GridDesign> design_grid() {
    return {
        {{8, {}, {4, 6}, {10, 10}, {10, 10}, 100.0}, 0.05},
        {{8, {}, {4}, {20}, {20}, 100.0}, 0.05},
        {{10, {}, {4, 6, 8}, {7, 12, 9}, {8, 5, 11}, 40.0}, 0.10},
        {{12, {}, {4, 8}, {15, 15}, {15, 15}, 100.0}, 0.05},
        {{12, {}, {6, 8}, {6, 9}, {12, 4}, 25.0}, 0.20},
        {{9, {1, 2, 4, 5, 7, 8, 10, 11, 13}, {4, 6}, {10, 14}, {9, 9}, 60.0}, 0.05},
        {{10, {0, 1, 3, 6, 7, 8, 10, 13, 14, 15}, {4, 5, 7}, {5, 6, 7}, {8, 9, 10}, 30.0}, 0.15},
        {{8, {1, 1.5, 2.5, 4, 4.5, 5, 6.5, 8}, {4, 5}, {11, 13}, {12, 10}, 80.0}, 0.01},
        {{14, {}, {4, 7, 10, 12}, {5, 5, 6, 6}, {4, 7, 5, 6}, 50.0}, 0.08},
        {{7, {}, {4, 5}, {16, 9}, {10, 15}, 200.0}, 0.05},
        {{11, {101, 102, 103, 104, 105, 106, 107, 108, 109, 110, 111}, {5, 9}, {12, 8}, {10, 10}, 100.0}, 0.12},
        {{16, {2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24, 26, 28, 30, 32}, {4, 9, 14}, {9, 8, 7}, {7, 8, 9}, 20.0},
         0.03},
    };
}

inline std::vector<Estimand> estimands_for(const DesignSpec& d) {
    std::vector<Estimand> out{Estimand::pooled()};
    const int max_a = d.periods - d.start_periods.front() + 1;
    for (int l = 1; l <= max_a; ++l) out.push_back(Estimand::exposure(l));
    for (int q = d.start_periods.front(); q <= d.periods; ++q) out.push_back(Estimand::calendar(q));
    return out;
}

inline constexpr Family kAllFamilies[] = {Family::DID,     Family::CitsFull,    Family::CitsDiscrete,
                                          Family::CitsCommonSlopes, Family::ItsFull, Family::ItsDiscrete,
                                          Family::ItsCommonSlopes};

}  // namespace fixtures
