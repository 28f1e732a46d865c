#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "panelpower/serialize.hpp"

namespace panelpower {

/// Everything needed for one power query; also the --design-file format.
struct Scenario {
    DesignSpec design;
    ErrorModel error;
    EstimatorSpec estimator;
    PowerQuery query;
    double mde_target = 0.20;
};

void to_json(nlohmann::json& j, const Scenario& s);
void from_json(const nlohmann::json& j, Scenario& s);

struct Preset {
    std::string name;
    std::string description;
    Scenario scenario;
};

[[nodiscard]] const std::vector<Preset>& presets();
/// Throws INVALID_INPUT for an unknown name.
[[nodiscard]] const Preset& find_preset(std::string_view name);

/// Adapts a design to a family: ITS families drop the comparison clusters.
[[nodiscard]] DesignSpec design_for_family(DesignSpec d, Family f);

/// The stated assumptions behind the published sample-size table: MDE 0.20,
/// two-tailed alpha 0.05, power 0.80, 50-50 split, N = 100, ICC 0.05, two
/// equal timing groups, even spacing, rho = psi = 0.4.
[[nodiscard]] Scenario table3_scenario(int periods, std::vector<int> starts, CorrStructure structure, DesignKind kind,
                                       Family family, Estimand estimand);

void to_json(nlohmann::json& j, const Preset& p);

}  // namespace panelpower
