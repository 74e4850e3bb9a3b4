#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "smr/model.hpp"

namespace smr {

// JSON layout:
//   { "gamma":..., "sigma":..., "n":...,
//     "xyy":[{"j":..,"k":..,"a_xyy":..,"a_j":..,"a_k":..}],
//     "yyy":[{"i":..,"j":..,"k":..,"b_ijk":..,"b_jki":..,"b_kij":..}] }

nlohmann::json coefficients_to_json(const CoefficientSet& set);

/// Throws ParseError on missing keys or wrong value types.
CoefficientSet coefficients_from_json(const nlohmann::json& doc);

CoefficientSet load_coefficients(const std::filesystem::path& path);
void save_coefficients(const CoefficientSet& set, const std::filesystem::path& path);

}  // namespace smr
