#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "panelpower/presets.hpp"

namespace panelpower {

/// Column order of the published sample-size table.
inline constexpr std::array<Family, 5> kTable3Families = {Family::DID, Family::CitsFull, Family::ItsFull,
                                                          Family::CitsCommonSlopes, Family::ItsCommonSlopes};

struct Table3Row {
    std::string panel;
    int periods = 0;
    std::vector<int> starts;
    CorrStructure structure = CorrStructure::AR1;
    DesignKind kind = DesignKind::CrossSectional;
    Estimand estimand;
    /// Published cluster counts; empty where the design is not estimable.
    std::array<std::optional<int>, 5> published;
};

[[nodiscard]] const std::vector<Table3Row>& table3_rows();

struct Table3Cell {
    std::size_t row = 0;
    Family family = Family::DID;
    std::optional<int> published;
    std::optional<int> computed;
    double continuous = 0.0;
    std::string error_code;  // set when the solve raised
    bool pass = false;
};

/// Solves every cell. A numeric cell passes within +-`tolerance` clusters;
/// an empty cell passes when validation rejects the design.
[[nodiscard]] std::vector<Table3Cell> reproduce_table3(int tolerance = 1);

struct DesignEffectPoint {
    double rho = 0.0;
    std::vector<int> starts;
    int reference_start = 0;
    double design_effect = 0.0;
};

struct DesignEffectGrid {
    std::vector<DesignEffectPoint> points;
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
};

/// Pooled DID design effects of staggered AR(1) designs against a single
/// timing group starting at the rounded mean start with `reference_rho`.
/// With `staggered` false the design also uses the single timing group.
[[nodiscard]] DesignEffectGrid design_effect_grid(const std::vector<double>& rhos,
                                                  const std::vector<std::pair<int, int>>& start_pairs,
                                                  int periods = 8, double reference_rho = 0.0, bool staggered = true);

[[nodiscard]] std::vector<double> default_rho_grid();
[[nodiscard]] std::vector<std::pair<int, int>> default_start_pairs();

}  // namespace panelpower
