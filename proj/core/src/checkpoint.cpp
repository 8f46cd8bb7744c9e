#include "jumpflow/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json_codec.hpp"
#include "jumpflow/corpus.hpp"

namespace jumpflow {

using detail::json;

namespace {

json widths_json(const LatentModel& model) {
  return {{"flow", model.flow_net().widths()},
          {"decay", model.decay_net().widths()},
          {"jump", model.jump_net().widths()},
          {"intensity", model.intensity_net().widths()}};
}

}  // namespace

void save_checkpoint(std::ostream& out, const Checkpoint& checkpoint) {
  const LatentModel model(checkpoint.config);
  model.check_params(checkpoint.params);
  json segments = json::array();
  for (const Segment& s : checkpoint.params.segments()) {
    segments.push_back({{"name", s.name}, {"offset", s.offset}, {"size", s.size}});
  }
  const auto values = checkpoint.params.values();
  const json j = {{"format_version", kCheckpointFormatVersion},
                  {"model", detail::model_to_json(checkpoint.config)},
                  {"widths", widths_json(model)},
                  {"segments", std::move(segments)},
                  {"params", std::vector<double>(values.begin(), values.end())}};
  out << j.dump() << '\n';
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ostringstream os;
  save_checkpoint(os, checkpoint);
  write_file_atomic(path, os.str());
}

Checkpoint load_checkpoint(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("checkpoint: invalid JSON: ") + e.what());
  }
  const int version = detail::field<int>(j, "format_version", "checkpoint");
  if (version != kCheckpointFormatVersion) {
    throw SchemaError("unsupported checkpoint format_version " + std::to_string(version));
  }
  Checkpoint out;
  out.config = detail::model_from_json(detail::field<json>(j, "model", "checkpoint"));
  const LatentModel model(out.config);
  if (detail::field<json>(j, "widths", "checkpoint") != widths_json(model)) {
    throw SchemaError("checkpoint: layer widths do not match the model configuration");
  }
  std::vector<Segment> segments;
  for (const auto& s : detail::field<json>(j, "segments", "checkpoint")) {
    segments.push_back(Segment{detail::field<std::string>(s, "name", "checkpoint segment"),
                               detail::field<std::size_t>(s, "offset", "checkpoint segment"),
                               detail::field<std::size_t>(s, "size", "checkpoint segment")});
  }
  out.params = ParamVector::from_parts(
      std::move(segments), detail::field<std::vector<double>>(j, "params", "checkpoint"));
  model.check_params(out.params);
  return out;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

}  // namespace jumpflow
