#include "jumpflow/param_vector.hpp"

#include <algorithm>

#include "jumpflow/errors.hpp"

namespace jumpflow {

std::size_t ParamVector::add_segment(std::string name, std::size_t size) {
  for (const Segment& s : segments_) {
    if (s.name == name) throw InvariantError("duplicate segment " + name);
  }
  segments_.push_back({std::move(name), values_.size(), size});
  values_.resize(values_.size() + size, 0.0);
  return segments_.size() - 1;
}

const Segment& ParamVector::segment(const std::string& name) const {
  for (const Segment& s : segments_) {
    if (s.name == name) return s;
  }
  throw InvariantError("unknown parameter segment " + name);
}

std::span<double> ParamVector::view(const std::string& name) {
  const Segment& s = segment(name);
  return std::span<double>(values_).subspan(s.offset, s.size);
}

std::span<const double> ParamVector::view(const std::string& name) const {
  const Segment& s = segment(name);
  return std::span<const double>(values_).subspan(s.offset, s.size);
}

void ParamVector::assign(std::span<const double> values) {
  if (values.size() != values_.size()) {
    throw DimensionError("ParamVector::assign size mismatch");
  }
  std::copy(values.begin(), values.end(), values_.begin());
}

ParamVector ParamVector::from_parts(std::vector<Segment> segments,
                                    std::vector<double> values) {
  std::vector<Segment> sorted = segments;
  std::sort(sorted.begin(), sorted.end(),
            [](const Segment& a, const Segment& b) { return a.offset < b.offset; });
  std::size_t cursor = 0;
  for (const Segment& s : sorted) {
    if (s.offset != cursor) {
      throw SchemaError("parameter segment '" + s.name +
                        "' leaves a gap or overlaps its predecessor");
    }
    cursor += s.size;
  }
  if (cursor != values.size()) {
    throw SchemaError("parameter segments do not cover the parameter array");
  }
  ParamVector out;
  out.segments_ = std::move(segments);
  out.values_ = std::move(values);
  return out;
}

}  // namespace jumpflow
