#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "crossrec/numcore/tape.hpp"

namespace crossrec::numcore {

inline constexpr int kCheckpointVersion = 1;

// Checkpoint layout (JSON):
//   {"format": "crossrec-checkpoint", "version": 1, "kind": "<model kind>",
//    "meta": {...}, "params": [{"name": ..., "rows": r, "cols": c,
//    "data": [row-major values]}]}
nlohmann::json params_to_json(const ParamSet& params);
ParamSet params_from_json(const nlohmann::json& j);

// Copies values by name into an already-shaped ParamSet; every parameter
// must be present with a matching shape.
void assign_params(ParamSet& target, const nlohmann::json& j);

nlohmann::json make_checkpoint(std::string kind, const nlohmann::json& meta, const ParamSet& params);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace crossrec::numcore
