#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace jumpflow {

/// Event payload space: discrete types (one-hot of width `types`) or real
/// feature vectors of width `dim` modelled by a `components`-way Gaussian
/// mixture.
struct MarkSpace {
  enum class Kind { discrete, continuous };

  Kind kind = Kind::discrete;
  std::size_t types = 1;
  std::size_t dim = 1;
  std::size_t components = 1;

  static MarkSpace discrete(std::size_t m) { return {Kind::discrete, m, 1, 1}; }
  static MarkSpace continuous(std::size_t d, std::size_t g) {
    return {Kind::continuous, 1, d, g};
  }

  bool is_discrete() const noexcept { return kind == Kind::discrete; }
  /// Width of the mark encoding fed to the jump network.
  std::size_t encoding_width() const noexcept { return is_discrete() ? types : dim; }
  void validate() const;

  friend bool operator==(const MarkSpace&, const MarkSpace&) = default;
};

struct Mark {
  std::size_t type = 0;          // discrete marks
  std::vector<double> features;  // continuous marks

  friend bool operator==(const Mark&, const Mark&) = default;
};

struct Event {
  double time = 0.0;
  Mark mark;

  friend bool operator==(const Event&, const Event&) = default;
};

/// Marked events observed on [t_start, t_end], t_start <= tau_1 < ... <= t_end.
struct EventSequence {
  double t_start = 0.0;
  double t_end = 0.0;
  std::vector<Event> events;

  double length() const noexcept { return t_end - t_start; }
  std::vector<double> times() const;

  friend bool operator==(const EventSequence&, const EventSequence&) = default;
};

/// Throws SchemaError on events outside the window, unsorted times or marks
/// that do not belong to `marks`.
void validate_sequence(const EventSequence& seq, const MarkSpace& marks);

/// Makes timestamps strictly increasing: an event tied with its predecessor is
/// moved to predecessor + 1e-9 * window length. Returns the number of events
/// moved.
std::size_t separate_ties(EventSequence& seq);

}  // namespace jumpflow
