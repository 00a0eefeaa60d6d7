#pragma once

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "windgp/gp.hpp"
#include "windgp/preprocessing.hpp"

namespace windgp {

/// Model files are JSON documents tagged {"format": "windgp-model", "version": N}.
/// Readers accept only their own major version.
inline constexpr int kModelFormatVersion = 1;

struct ModelFile {
    TrainedModel model;
    std::optional<LinkSpec> link;
    nlohmann::ordered_json metadata = nlohmann::ordered_json::object();
};

nlohmann::ordered_json model_to_json(const TrainedModel& model, const std::optional<LinkSpec>& link = std::nullopt,
                                     const nlohmann::ordered_json& metadata = nlohmann::ordered_json::object());

/// Throws DataError for malformed documents or a version mismatch.
ModelFile model_from_json(const nlohmann::ordered_json& doc);

void save_model(const TrainedModel& model, const std::filesystem::path& path,
                const std::optional<LinkSpec>& link = std::nullopt,
                const nlohmann::ordered_json& metadata = nlohmann::ordered_json::object());
ModelFile load_model(const std::filesystem::path& path);

}  // namespace windgp
