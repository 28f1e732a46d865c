#include "panelpower/presets.hpp"

#include "panelpower/error.hpp"

namespace panelpower {

using nlohmann::json;

void to_json(json& j, const Scenario& s) {
    j = json{{"design", s.design},
             {"error", s.error},
             {"estimator", s.estimator},
             {"query", s.query},
             {"mde_target", s.mde_target}};
}

void from_json(const json& j, Scenario& s) {
    if (!j.is_object()) throw PanelPowerError(ErrorCode::InvalidInput, "expected a JSON object", "design");
    for (const char* key : {"design", "error", "estimator"}) {
        if (!j.contains(key)) throw PanelPowerError(ErrorCode::InvalidInput, std::string("missing field ") + key, key);
    }
    s.design = j.at("design").get<DesignSpec>();
    s.error = j.at("error").get<ErrorModel>();
    s.estimator = j.at("estimator").get<EstimatorSpec>();
    s.query = j.contains("query") ? j.at("query").get<PowerQuery>() : PowerQuery{};
    if (j.contains("mde_target") && !j.at("mde_target").is_null()) {
        if (!j.at("mde_target").is_number())
            throw PanelPowerError(ErrorCode::InvalidInput, "mde_target must be a number", "mde_target");
        s.mde_target = j.at("mde_target").get<double>();
    }
}

DesignSpec design_for_family(DesignSpec d, Family f) {
    if (is_its(f)) std::fill(d.comparison_clusters.begin(), d.comparison_clusters.end(), 0.0);
    return d;
}

Scenario table3_scenario(int periods, std::vector<int> starts, CorrStructure structure, DesignKind kind,
                         Family family, Estimand estimand) {
    Scenario s;
    const std::size_t groups = starts.size();
    s.design.periods = periods;
    s.design.start_periods = std::move(starts);
    s.design.treated_clusters.assign(groups, 10.0);
    s.design.comparison_clusters.assign(groups, 10.0);
    s.design.individuals = 100.0;
    s.design = design_for_family(std::move(s.design), family);
    s.error = {0.05, structure, 0.4, kind, 0.4};
    s.estimator = {family, estimand, std::nullopt};
    return s;
}

const std::vector<Preset>& presets() {
    static const std::vector<Preset> all = [] {
        std::vector<Preset> out;
        out.push_back({"table3-base",
                       "P=8, S=(4,6), two equal timing groups, 50-50 split, N=100, ICC 0.05, AR(1) rho 0.4, "
                       "MDE 0.20 at alpha 0.05 and power 0.80",
                       table3_scenario(8, {4, 6}, CorrStructure::AR1, DesignKind::CrossSectional, Family::DID,
                                       Estimand::pooled())});
        Scenario running;
        running.design = {8, {}, {6, 7, 8}, {19, 20, 12}, {10, 11, 7}, 230.0};
        running.error = {0.05, CorrStructure::AR1, 0.49, DesignKind::CrossSectional, 0.0};
        running.estimator = {Family::DID, Estimand::pooled(), std::nullopt};
        out.push_back({"running-example",
                       "P=8 with three timing groups starting at 6, 7, 8; 51 treatment and 28 comparison clusters, "
                       "N=230, rho 0.49",
                       running});
        out.push_back({"table3-longitudinal",
                       "P=12, S=(6,8), longitudinal design with rho = psi = 0.4, otherwise as table3-base",
                       table3_scenario(12, {6, 8}, CorrStructure::AR1, DesignKind::Longitudinal, Family::DID,
                                       Estimand::pooled())});
        out.push_back({"table3-constant",
                       "P=8, S=(4,6) with constant autocorrelation 0.4, otherwise as table3-base",
                       table3_scenario(8, {4, 6}, CorrStructure::Constant, DesignKind::CrossSectional, Family::DID,
                                       Estimand::pooled())});
        return out;
    }();
    return all;
}

const Preset& find_preset(std::string_view name) {
    for (const Preset& p : presets())
        if (p.name == name) return p;
    throw PanelPowerError(ErrorCode::InvalidInput, "unknown preset '" + std::string(name) + "'", "preset");
}

void to_json(json& j, const Preset& p) {
    j = json{{"name", p.name}, {"description", p.description}, {"scenario", p.scenario}};
}

}  // namespace panelpower
