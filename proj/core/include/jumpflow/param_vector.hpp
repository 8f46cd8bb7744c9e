#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace jumpflow {

struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Flat parameter array plus a table of named, disjoint, covering segments.
class ParamVector {
 public:
  ParamVector() = default;

  /// Appends a zero-filled segment and returns its index.
  std::size_t add_segment(std::string name, std::size_t size);

  std::size_t size() const noexcept { return values_.size(); }
  const std::vector<Segment>& segments() const noexcept { return segments_; }
  const Segment& segment(const std::string& name) const;

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> view(const std::string& name);
  std::span<const double> view(const std::string& name) const;

  /// Replaces the values wholesale; the size must match.
  void assign(std::span<const double> values);

  /// Rebuilds from a segment table and values (used by checkpoint loading).
  /// Throws SchemaError unless the segments are disjoint and cover the values.
  static ParamVector from_parts(std::vector<Segment> segments,
                                std::vector<double> values);

 private:
  std::vector<double> values_;
  std::vector<Segment> segments_;
};

}  // namespace jumpflow
