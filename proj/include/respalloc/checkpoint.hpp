#pragma once

#include <filesystem>
#include <stdexcept>

#include <json.hpp>

#include "respalloc/models.hpp"

namespace respalloc {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// JSON document holding kind, dimensions, flat parameters, init seed and
/// standardizer. Doubles are written in shortest round-trip form, so
/// parameters reload bit-exactly.
nlohmann::json model_to_json(const ResponsibilityModel& model);
ResponsibilityModel model_from_json(const nlohmann::json& doc);

/// `provenance` is stored verbatim under its own key.
void save_checkpoint(const ResponsibilityModel& model, const std::filesystem::path& path,
                     const nlohmann::json& provenance = nlohmann::json::object());
ResponsibilityModel load_checkpoint(const std::filesystem::path& path);

/// Writes `text` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace respalloc
