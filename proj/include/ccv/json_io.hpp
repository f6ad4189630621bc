#pragma once

#include <string>

#include "ccv/bounds.hpp"
#include "ccv/simulate.hpp"

#include "json.hpp"

namespace ccv {

// Channel spec file: {"input_symbols": [...], "output_symbols": [...],
//                     "transition": [[...], ...], "cost": [...]}
Dmc load_channel_file(const std::string& path);
Dmc channel_from_json(const nlohmann::json& j);

// All floats printed with 12 significant digits so reports are stable goldens.
std::string to_json_string(const nlohmann::json& j);

nlohmann::json solution_to_json(const CapacityCostSolution& sol, const DispersionInfo& disp);
nlohmann::json kresult_to_json(const KResult& k, bool with_oracle);
nlohmann::json simreport_to_json(const SimReport& rep);
nlohmann::json exactcode_to_json(const ExactCodeReport& rep);

std::string curve_to_csv(const std::vector<CurvePoint>& pts);
std::string simreport_to_csv_row(const SimReport& rep);

}  // namespace ccv
