#pragma once

#include <filesystem>
#include <iosfwd>

#include "jumpflow/model.hpp"
#include "jumpflow/param_vector.hpp"

namespace jumpflow {

inline constexpr int kCheckpointFormatVersion = 1;

/// Model configuration plus flat parameters. On disk this is one JSON object:
///
///   {"format_version":1, "model":{...}, "widths":{"flow":[...], ...},
///    "segments":[{"name":..,"offset":..,"size":..}, ...], "params":[...]}
///
/// Each network's parameters are flattened layer by layer, weights (row-major,
/// out x in) before biases.
struct Checkpoint {
  ModelConfig config;
  ParamVector params;
};

void save_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Throws SchemaError on version, width or segment-table mismatches.
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace jumpflow
