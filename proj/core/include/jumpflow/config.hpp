#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "jumpflow/model.hpp"
#include "jumpflow/ode.hpp"
#include "jumpflow/trainer.hpp"

namespace jumpflow {

/// Everything a training or evaluation run is configured with. Read from a
/// TOML file with the sections [model], [train] and [solver].
struct RunConfig {
  ModelConfig model;
  /// When false the mark space is taken from the corpus at train time and only
  /// model.marks.components is used.
  bool marks_explicit = false;
  TrainConfig train;
  SolverOptions solver;
  std::size_t eval_grid_points = 2000;

  /// Throws SchemaError on invalid values.
  void validate() const;
};

/// A small TOML subset: [section] headers, `key = value` lines with integers,
/// floats, booleans, "strings" or flat arrays of numbers, and # comments.
struct TomlValue {
  std::variant<double, bool, std::string, std::vector<double>> value;
  bool integer = false;  // a number written without fraction or exponent
};
using TomlTable = std::map<std::string, std::map<std::string, TomlValue>>;

/// Throws SchemaError with the line number on syntax errors or duplicate keys.
TomlTable parse_toml(const std::string& text);

/// Unknown sections or keys are rejected.
RunConfig config_from_toml(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Round-trips through config_from_toml.
std::string config_to_toml(const RunConfig& config);
std::string config_to_json(const RunConfig& config);

}  // namespace jumpflow
