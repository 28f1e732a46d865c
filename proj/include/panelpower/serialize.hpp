#pragma once

#include <json.hpp>
#include <string_view>

#include "panelpower/design.hpp"
#include "panelpower/power.hpp"
#include "panelpower/simulation.hpp"
#include "panelpower/variance.hpp"

namespace panelpower {

// Parsing throws PanelPowerError(INVALID_INPUT) naming the offending field.

void to_json(nlohmann::json& j, const DesignSpec& d);
void from_json(const nlohmann::json& j, DesignSpec& d);
void to_json(nlohmann::json& j, const ErrorModel& e);
void from_json(const nlohmann::json& j, ErrorModel& e);
void to_json(nlohmann::json& j, const Estimand& e);
void from_json(const nlohmann::json& j, Estimand& e);
void to_json(nlohmann::json& j, const Covariates& c);
void from_json(const nlohmann::json& j, Covariates& c);
void to_json(nlohmann::json& j, const EstimatorSpec& e);
void from_json(const nlohmann::json& j, EstimatorSpec& e);
void to_json(nlohmann::json& j, const PowerQuery& q);
void from_json(const nlohmann::json& j, PowerQuery& q);
void to_json(nlohmann::json& j, const TimeGeometry& g);
void to_json(nlohmann::json& j, const VarianceBreakdown& v);
void to_json(nlohmann::json& j, const SolverStep& s);
void to_json(nlohmann::json& j, const PowerResult& r);
void to_json(nlohmann::json& j, const OracleReport& r);

/// Accepts "DID", "cits-full", "CITS_FULL", ... (case and '-'/'_' insensitive).
[[nodiscard]] Family parse_family(std::string_view text);
/// Accepts "pooled", "exposure:3", "EXPOSURE(3)", "calendar:7".
[[nodiscard]] Estimand parse_estimand(std::string_view text);
[[nodiscard]] CorrStructure parse_corr_structure(std::string_view text);
[[nodiscard]] DesignKind parse_design_kind(std::string_view text);

}  // namespace panelpower
