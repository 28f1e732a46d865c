#include "panelpower/serialize.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "panelpower/error.hpp"

namespace panelpower {

using nlohmann::json;

namespace {

std::string normalise(std::string_view text) {
    std::string s(text);
    for (char& c : s) c = c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

template <class T>
T field(const json& j, const char* name) {
    if (!j.is_object()) throw PanelPowerError(ErrorCode::InvalidInput, "expected a JSON object", name);
    const auto it = j.find(name);
    if (it == j.end()) throw PanelPowerError(ErrorCode::InvalidInput, std::string("missing field ") + name, name);
    try {
        return it->get<T>();
    } catch (const json::exception& e) {
        throw PanelPowerError(ErrorCode::InvalidInput, std::string("bad value for ") + name + ": " + e.what(), name);
    }
}

template <class T>
T field_or(const json& j, const char* name, T fallback) {
    if (!j.is_object() || !j.contains(name) || j.at(name).is_null()) return fallback;
    return field<T>(j, name);
}

int parse_index(std::string_view digits, const char* name) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(std::string(digits), &used);
        if (used == digits.size()) return v;
    } catch (const std::exception&) {
    }
    throw PanelPowerError(ErrorCode::InvalidInput, "expected an integer period index", name);
}

}  // namespace

Family parse_family(std::string_view text) {
    const std::string s = normalise(text);
    for (Family f : {Family::DID, Family::CitsFull, Family::CitsDiscrete, Family::CitsCommonSlopes, Family::ItsFull,
                     Family::ItsDiscrete, Family::ItsCommonSlopes}) {
        if (s == family_name(f)) return f;
    }
    if (s == "CITS_CS") return Family::CitsCommonSlopes;
    if (s == "ITS_CS") return Family::ItsCommonSlopes;
    throw PanelPowerError(ErrorCode::InvalidInput, "unknown estimator family '" + std::string(text) + "'", "family");
}

Estimand parse_estimand(std::string_view text) {
    const std::string s = normalise(text);
    if (s == "POOLED") return Estimand::pooled();
    for (auto [prefix, kind] : {std::pair{std::string("EXPOSURE"), EstimandKind::Exposure},
                                std::pair{std::string("CALENDAR"), EstimandKind::Calendar}}) {
        if (s.rfind(prefix, 0) != 0) continue;
        std::string rest = s.substr(prefix.size());
        if (!rest.empty() && (rest.front() == ':' || rest.front() == '=' || rest.front() == '(')) rest.erase(0, 1);
        if (!rest.empty() && rest.back() == ')') rest.pop_back();
        const char* name = kind == EstimandKind::Exposure ? "l" : "q";
        return {kind, parse_index(rest, name)};
    }
    throw PanelPowerError(ErrorCode::InvalidInput, "unknown estimand '" + std::string(text) + "'", "estimand");
}

CorrStructure parse_corr_structure(std::string_view text) {
    const std::string s = normalise(text);
    if (s == "AR1" || s == "AR(1)") return CorrStructure::AR1;
    if (s == "CONSTANT") return CorrStructure::Constant;
    throw PanelPowerError(ErrorCode::InvalidInput, "unknown correlation structure '" + std::string(text) + "'",
                          "corr_structure");
}

DesignKind parse_design_kind(std::string_view text) {
    const std::string s = normalise(text);
    if (s == "CROSS_SECTIONAL") return DesignKind::CrossSectional;
    if (s == "LONGITUDINAL") return DesignKind::Longitudinal;
    throw PanelPowerError(ErrorCode::InvalidInput, "unknown design kind '" + std::string(text) + "'", "design_kind");
}

void to_json(json& j, const DesignSpec& d) {
    j = json{{"P", d.periods},
             {"times", d.times.empty() ? default_times(d.periods) : d.times},
             {"K", d.timing_groups()},
             {"S", d.start_periods},
             {"M_T_k", d.treated_clusters},
             {"M_C_k", d.comparison_clusters},
             {"N", d.individuals}};
}

void from_json(const json& j, DesignSpec& d) {
    d.periods = field<int>(j, "P");
    d.times = field_or<std::vector<double>>(j, "times", {});
    d.start_periods = field<std::vector<int>>(j, "S");
    d.treated_clusters = field<std::vector<double>>(j, "M_T_k");
    d.comparison_clusters =
        field_or<std::vector<double>>(j, "M_C_k", std::vector<double>(d.start_periods.size(), 0.0));
    d.individuals = field<double>(j, "N");
    if (j.contains("K") && field<int>(j, "K") != d.timing_groups())
        throw PanelPowerError(ErrorCode::InvalidInput, "K does not match the number of start periods", "K");
}

void to_json(json& j, const ErrorModel& e) {
    j = json{{"ICC_theta", e.icc},
             {"corr_structure", e.structure == CorrStructure::AR1 ? "AR1" : "CONSTANT"},
             {"rho", e.rho},
             {"design_kind", e.kind == DesignKind::CrossSectional ? "CROSS_SECTIONAL" : "LONGITUDINAL"},
             {"psi", e.psi}};
}

void from_json(const json& j, ErrorModel& e) {
    e.icc = field<double>(j, "ICC_theta");
    e.structure = parse_corr_structure(field_or<std::string>(j, "corr_structure", "AR1"));
    e.rho = field_or<double>(j, "rho", 0.0);
    e.kind = parse_design_kind(field_or<std::string>(j, "design_kind", "CROSS_SECTIONAL"));
    e.psi = field_or<double>(j, "psi", 0.0);
}

void to_json(json& j, const Estimand& e) {
    j = json{{"kind", estimand_kind_name(e.kind)}};
    if (e.kind == EstimandKind::Exposure) j["l"] = e.index;
    if (e.kind == EstimandKind::Calendar) j["q"] = e.index;
}

void from_json(const json& j, Estimand& e) {
    if (j.is_string()) {
        e = parse_estimand(j.get<std::string>());
        return;
    }
    const std::string kind = normalise(field<std::string>(j, "kind"));
    if (kind == "POOLED") e = Estimand::pooled();
    else if (kind == "EXPOSURE") e = Estimand::exposure(field<int>(j, "l"));
    else if (kind == "CALENDAR") e = Estimand::calendar(field<int>(j, "q"));
    else throw PanelPowerError(ErrorCode::InvalidInput, "unknown estimand kind '" + kind + "'", "estimand");
}

void to_json(json& j, const Covariates& c) { j = json{{"R2_YX", c.r2_yx}, {"R2_TX", c.r2_tx}, {"v", c.count}}; }

void from_json(const json& j, Covariates& c) {
    c.r2_yx = field_or<double>(j, "R2_YX", 0.0);
    c.r2_tx = field_or<double>(j, "R2_TX", 0.0);
    c.count = field_or<int>(j, "v", 0);
}

void to_json(json& j, const EstimatorSpec& e) {
    j = json{{"family", family_name(e.family)}, {"estimand", e.estimand}};
    j["covariates"] = e.covariates ? json(*e.covariates) : json(nullptr);
}

void from_json(const json& j, EstimatorSpec& e) {
    e.family = parse_family(field<std::string>(j, "family"));
    e.estimand = j.contains("estimand") ? field<Estimand>(j, "estimand") : Estimand::pooled();
    e.covariates.reset();
    if (j.contains("covariates") && !j.at("covariates").is_null()) e.covariates = field<Covariates>(j, "covariates");
}

void to_json(json& j, const PowerQuery& q) { j = json{{"alpha", q.alpha}, {"lambda", q.power}}; }

void from_json(const json& j, PowerQuery& q) {
    q.alpha = field_or<double>(j, "alpha", 0.05);
    q.power = field_or<double>(j, "lambda", 0.80);
}

void to_json(json& j, const TimeGeometry& g) {
    j = json{{"B_k", g.pre_periods},          {"A_k", g.post_periods},
             {"mean_time_pre", g.mean_time_pre}, {"mean_time_post", g.mean_time_post},
             {"mean_time_full", g.mean_time_full}, {"SSQT_pre", g.ssqt_pre},
             {"SSQT_post", g.ssqt_post},      {"SSQT_full", g.ssqt_full},
             {"post_share", g.post_share}};
}

void to_json(json& j, const VarianceBreakdown& v) {
    j = json{{"total", v.total},
             {"theta_block", v.theta_block},
             {"epsilon_block", v.epsilon_block},
             {"per_group", v.per_group},
             {"weights", v.weights},
             {"terms", v.terms},
             {"covariate_factor", v.covariate_factor}};
}

void to_json(json& j, const SolverStep& s) {
    j = json{{"iteration", s.iteration}, {"M", s.clusters}, {"df", s.df}, {"factor", s.factor}};
}

void to_json(json& j, const PowerResult& r) {
    j = json{{"df", r.df}, {"factor", r.factor}, {"variance", r.variance}, {"solver_trace", r.trace},
             {"warnings", r.warnings}};
    j["mde"] = r.mde ? json(*r.mde) : json(nullptr);
    j["M"] = r.clusters ? json(*r.clusters) : json(nullptr);
    j["M_continuous"] = r.clusters_continuous;
    if (!r.treated_allocation.empty()) {
        j["M_T_k"] = r.treated_allocation;
        j["M_C_k"] = r.comparison_allocation;
    }
}

void to_json(json& j, const OracleReport& r) {
    j = json{{"estimator", r.estimator},
             {"label", estimator_label(r.estimator)},
             {"replications", r.replications},
             {"empirical_variance", r.empirical_variance},
             {"closed_form", r.closed_form},
             {"relative_error", r.relative_error},
             {"monte_carlo_se", r.monte_carlo_se},
             {"z_score", r.z_score},
             {"mean_estimate", r.mean_estimate},
             {"mean_standard_error", r.mean_standard_error}};
}

}  // namespace panelpower
