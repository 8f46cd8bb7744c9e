#include <algorithm>
#include <stdexcept>

#include "jumpflow/adjoint.hpp"
#include "jumpflow/errors.hpp"

namespace jumpflow {

CheckpointGrid make_grid(const EventSequence& seq, std::size_t checkpoints, double phase) {
  if (checkpoints < 2) throw std::invalid_argument("checkpoint grid needs >= 2 nodes");
  if (!(phase >= 0.0 && phase < 1.0)) throw std::invalid_argument("grid phase must be in [0, 1)");
  if (!(seq.t_start <= seq.t_end)) throw SchemaError("sequence window is reversed");

  CheckpointGrid grid;
  grid.t_start = seq.t_start;
  grid.t_end = seq.t_end;
  const double length = seq.t_end - seq.t_start;

  const double spacing = length / static_cast<double>(checkpoints - 1);
  std::vector<double> uniform{seq.t_start};
  for (std::size_t i = phase > 0.0 ? 0 : 1; i + 1 < checkpoints; ++i) {
    const double t = seq.t_start + spacing * (static_cast<double>(i) + phase);
    if (t > uniform.back() && t < seq.t_end) uniform.push_back(t);
  }
  if (length > 0.0) uniform.push_back(seq.t_end);

  std::size_t i = 0, j = 0;
  while (i < uniform.size() || j < seq.events.size()) {
    const double tc = i < uniform.size() ? uniform[i] : seq.t_end + 1.0;
    const double te = j < seq.events.size() ? seq.events[j].time : seq.t_end + 1.0;
    GridNode node;
    if (tc < te) {
      node.time = tc;
      node.checkpoint = true;
      ++i;
    } else if (te < tc) {
      node.time = te;
      node.event = static_cast<std::ptrdiff_t>(j++);
    } else {
      node.time = tc;
      node.checkpoint = true;
      node.event = static_cast<std::ptrdiff_t>(j++);
      ++i;
    }
    if (!grid.nodes.empty() && node.time <= grid.nodes.back().time) {
      throw SchemaError("event times must be strictly increasing inside the window");
    }
    grid.nodes.push_back(node);
  }

  for (std::size_t k = 0; k + 1 < grid.nodes.size(); ++k) {
    const double half = 0.5 * (grid.nodes[k + 1].time - grid.nodes[k].time);
    grid.nodes[k].weight_right += half;
    grid.nodes[k + 1].weight_left += half;
  }
  return grid;
}

double quadrature_compensator(const CheckpointGrid& grid, std::span<const double> left,
                              std::span<const double> right) {
  if (grid.nodes.size() < 2) throw std::invalid_argument("quadrature needs >= 2 nodes");
  if (left.size() != grid.nodes.size() || right.size() != grid.nodes.size()) {
    throw DimensionError("quadrature values do not match the grid");
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < grid.nodes.size(); ++k) {
    acc += grid.nodes[k].weight_left * left[k] + grid.nodes[k].weight_right * right[k];
  }
  return acc;
}

double trapezoid(std::span<const double> times, std::span<const double> values) {
  if (times.size() < 2) throw std::invalid_argument("trapezoid needs >= 2 nodes");
  if (times.size() != values.size()) throw DimensionError("trapezoid: size mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    acc += 0.5 * (times[k + 1] - times[k]) * (values[k] + values[k + 1]);
  }
  return acc;
}

}  // namespace jumpflow
