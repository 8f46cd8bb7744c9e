#include "jumpflow/events.hpp"

#include <cmath>

#include "jumpflow/errors.hpp"

namespace jumpflow {

void MarkSpace::validate() const {
  if (is_discrete()) {
    if (types < 1) throw SchemaError("discrete mark space needs at least one type");
  } else if (dim < 1 || components < 1) {
    throw SchemaError("continuous mark space needs dim >= 1 and components >= 1");
  }
}

std::vector<double> EventSequence::times() const {
  std::vector<double> out;
  out.reserve(events.size());
  for (const Event& e : events) out.push_back(e.time);
  return out;
}

void validate_sequence(const EventSequence& seq, const MarkSpace& marks) {
  if (!(seq.t_start <= seq.t_end)) throw SchemaError("sequence window is reversed");
  double previous = seq.t_start;
  bool first = true;
  for (const Event& e : seq.events) {
    if (!std::isfinite(e.time) || e.time < seq.t_start || e.time > seq.t_end) {
      throw SchemaError("event at t=" + std::to_string(e.time) + " lies outside window [" +
                        std::to_string(seq.t_start) + ", " + std::to_string(seq.t_end) + "]");
    }
    if (!first && !(e.time > previous)) {
      throw SchemaError("event times must be strictly increasing (t=" +
                        std::to_string(e.time) + ")");
    }
    if (marks.is_discrete()) {
      if (e.mark.type >= marks.types || !e.mark.features.empty()) {
        throw SchemaError("event mark is not a type id in [0, " +
                          std::to_string(marks.types) + ")");
      }
    } else if (e.mark.features.size() != marks.dim) {
      throw SchemaError("event mark has " + std::to_string(e.mark.features.size()) +
                        " features, expected " + std::to_string(marks.dim));
    }
    previous = e.time;
    first = false;
  }
}

std::size_t separate_ties(EventSequence& seq) {
  const double offset = 1e-9 * (seq.t_end - seq.t_start);
  std::size_t moved = 0;
  for (std::size_t j = 1; j < seq.events.size(); ++j) {
    if (seq.events[j].time <= seq.events[j - 1].time) {
      seq.events[j].time = seq.events[j - 1].time + offset;
      ++moved;
    }
  }
  return moved;
}

}  // namespace jumpflow
