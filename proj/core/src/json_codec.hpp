#pragma once

// nlohmann::json conversions shared by the corpus and checkpoint readers.

#include <json.hpp>
#include <string>

#include "jumpflow/classical.hpp"
#include "jumpflow/errors.hpp"
#include "jumpflow/events.hpp"
#include "jumpflow/model.hpp"

namespace jumpflow::detail {

using nlohmann::json;

template <class T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw SchemaError(where + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(where + ": field '" + key + "' has the wrong type");
  }
}

inline json marks_to_json(const MarkSpace& m) {
  if (m.is_discrete()) return {{"kind", "discrete"}, {"types", m.types}};
  return {{"kind", "continuous"}, {"dim", m.dim}, {"components", m.components}};
}

inline MarkSpace marks_from_json(const json& j) {
  const auto kind = field<std::string>(j, "kind", "marks");
  MarkSpace m;
  if (kind == "discrete") {
    m = MarkSpace::discrete(field<std::size_t>(j, "types", "marks"));
  } else if (kind == "continuous") {
    m = MarkSpace::continuous(field<std::size_t>(j, "dim", "marks"),
                              field<std::size_t>(j, "components", "marks"));
  } else {
    throw SchemaError("marks: unknown kind '" + kind + "'");
  }
  try {
    m.validate();
  } catch (const std::exception& e) {
    throw SchemaError(std::string("marks: ") + e.what());
  }
  return m;
}

inline json spec_to_json(const ClassicalProcessSpec& spec) {
  const Family family = family_of(spec);
  json j = {{"family", family_name(family)}};
  const auto names = parameter_names(family);
  const auto values = parameters(spec);
  for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = values[i];
  return j;
}

inline ClassicalProcessSpec spec_from_json(const json& j) {
  Family family;
  try {
    family = parse_family(field<std::string>(j, "family", "process spec"));
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("process spec: ") + e.what());
  }
  std::vector<double> values;
  for (const auto& name : parameter_names(family)) {
    values.push_back(field<double>(j, name.c_str(), "process spec"));
  }
  ClassicalProcessSpec spec = make_spec(family, values);
  try {
    validate(spec);
  } catch (const std::invalid_argument& e) {
    throw SchemaError(e.what());
  }
  return spec;
}

inline json model_to_json(const ModelConfig& c) {
  return {{"n1", c.n1},
          {"n2", c.n2},
          {"marks", marks_to_json(c.marks)},
          {"flow_hidden", c.flow_hidden},
          {"decay_hidden", c.decay_hidden},
          {"jump_hidden", c.jump_hidden},
          {"intensity_hidden", c.intensity_hidden}};
}

inline ModelConfig model_from_json(const json& j) {
  ModelConfig c;
  c.n1 = field<std::size_t>(j, "n1", "model");
  c.n2 = field<std::size_t>(j, "n2", "model");
  c.marks = marks_from_json(field<json>(j, "marks", "model"));
  c.flow_hidden = field<std::vector<std::size_t>>(j, "flow_hidden", "model");
  c.decay_hidden = field<std::vector<std::size_t>>(j, "decay_hidden", "model");
  c.jump_hidden = field<std::vector<std::size_t>>(j, "jump_hidden", "model");
  c.intensity_hidden = field<std::vector<std::size_t>>(j, "intensity_hidden", "model");
  try {
    c.validate();
  } catch (const SchemaError&) {
    throw;
  } catch (const std::exception& e) {
    throw SchemaError(std::string("model: ") + e.what());
  }
  return c;
}

}  // namespace jumpflow::detail
