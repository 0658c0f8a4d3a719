#pragma once

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "greybox/model.hpp"

namespace greybox {

// Matrices are stored as row-major nested arrays. Doubles are written with
// shortest round-trip formatting, so a save/load cycle is exact.

nlohmann::json matrix_to_json(const Matrix& M);
Matrix matrix_from_json(const nlohmann::json& j, const char* what);
nlohmann::json mask_to_json(const Mask& M);
Mask mask_from_json(const nlohmann::json& j, const char* what);

nlohmann::json basis_to_json(const BasisSet& basis);
BasisSet basis_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const GreyBoxModel& model,
                             const std::optional<ParameterMask>& mask = std::nullopt);
GreyBoxModel model_from_json(const nlohmann::json& j);
/// Mask stored alongside a model, or ParameterMask::defaults when absent.
ParameterMask mask_from_model_json(const nlohmann::json& j, const Dimensions& dims);

void save_model(const std::filesystem::path& path, const GreyBoxModel& model,
                const std::optional<ParameterMask>& mask = std::nullopt);
GreyBoxModel load_model(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace greybox
