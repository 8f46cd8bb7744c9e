#include "jumpflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "jumpflow/errors.hpp"
#include "jumpflow/parallel.hpp"

namespace jumpflow {
namespace {

// Left-limit states at every event of `seq`, in event order.
std::vector<std::vector<double>> event_states(const LatentModel& model,
                                              std::span<const double> params,
                                              const EventSequence& seq,
                                              const SolverOptions& solver) {
  std::vector<LatentModel::SweepNode> nodes;
  nodes.reserve(seq.events.size());
  for (const Event& e : seq.events) nodes.push_back({e.time, &e});
  std::vector<std::vector<double>> states(seq.events.size());
  model.sweep(params, seq.t_start, model.initial_state(params), nodes, solver,
              [&](std::size_t i, std::span<const double> left, std::span<const double>) {
                states[i].assign(left.begin(), left.end());
              });
  return states;
}

struct Tally {
  double sum = 0.0;
  double count = 0.0;
};

Tally reduce(const std::vector<Tally>& parts) {
  Tally total;
  for (const Tally& t : parts) {
    total.sum += t.sum;
    total.count += t.count;
  }
  return total;
}

double percent_error(double predicted, double truth) {
  if (!(truth > 0.0)) throw InvariantError("ground-truth intensity is not positive");
  return std::abs(predicted - truth) / truth * 100.0;
}

}  // namespace

std::vector<double> uniform_grid(double t_start, double t_end, std::size_t points) {
  if (points < 2) throw std::invalid_argument("uniform grid needs >= 2 points");
  std::vector<double> out(points);
  for (std::size_t i = 0; i < points; ++i) {
    out[i] = t_start + (t_end - t_start) * static_cast<double>(i) /
                           static_cast<double>(points - 1);
  }
  out.back() = t_end;
  return out;
}

std::vector<double> model_intensity_trace(const LatentModel& model,
                                          std::span<const double> params,
                                          const EventSequence& seq,
                                          std::span<const double> times,
                                          const SolverOptions& solver) {
  // Merge query times with events; a query at an event time reads the left
  // limit, so the event's node must come after it.
  std::vector<LatentModel::SweepNode> nodes;
  std::vector<std::ptrdiff_t> query_of_node;
  std::size_t q = 0, e = 0;
  while (q < times.size() || e < seq.events.size()) {
    if (q < times.size() && (e == seq.events.size() || times[q] <= seq.events[e].time)) {
      nodes.push_back({times[q], nullptr});
      query_of_node.push_back(static_cast<std::ptrdiff_t>(q++));
    } else {
      nodes.push_back({seq.events[e].time, &seq.events[e]});
      query_of_node.push_back(-1);
      ++e;
    }
  }
  std::vector<double> out(times.size());
  LatentModel::Workspace ws;
  model.sweep(params, seq.t_start, model.initial_state(params), nodes, solver,
              [&](std::size_t i, std::span<const double> left, std::span<const double>) {
                if (query_of_node[i] >= 0) {
                  out[static_cast<std::size_t>(query_of_node[i])] =
                      model.intensity(params, left, ws).total;
                }
              });
  return out;
}

IntensityTrace intensity_trace(const LatentModel& model, std::span<const double> params,
                               const ClassicalProcessSpec& truth, const EventSequence& seq,
                               std::size_t points, const SolverOptions& solver) {
  IntensityTrace trace;
  trace.times = uniform_grid(seq.t_start, seq.t_end, points);
  trace.model = model_intensity_trace(model, params, seq, trace.times, solver);
  trace.truth = true_intensity_trace(truth, seq, trace.times);
  return trace;
}

double eval_intensity_mape(const LatentModel& model, std::span<const double> params,
                           const ClassicalProcessSpec& truth,
                           std::span<const EventSequence> sequences, std::size_t points,
                           const SolverOptions& solver) {
  if (sequences.empty()) throw std::invalid_argument("MAPE needs at least one sequence");
  std::vector<Tally> parts(sequences.size());
  parallel_for(sequences.size(), [&](std::size_t i, std::size_t) {
    const IntensityTrace trace = intensity_trace(model, params, truth, sequences[i], points, solver);
    for (std::size_t k = 0; k < trace.times.size(); ++k) {
      parts[i].sum += percent_error(trace.model[k], trace.truth[k]);
    }
    parts[i].count = static_cast<double>(trace.times.size());
  });
  const Tally total = reduce(parts);
  return total.sum / total.count;
}

double classical_intensity_mape(const ClassicalProcessSpec& predictor,
                                const ClassicalProcessSpec& truth,
                                std::span<const EventSequence> sequences, std::size_t points) {
  if (sequences.empty()) throw std::invalid_argument("MAPE needs at least one sequence");
  std::vector<Tally> parts(sequences.size());
  parallel_for(sequences.size(), [&](std::size_t i, std::size_t) {
    const auto times = uniform_grid(sequences[i].t_start, sequences[i].t_end, points);
    const auto p = true_intensity_trace(predictor, sequences[i], times);
    const auto t = true_intensity_trace(truth, sequences[i], times);
    for (std::size_t k = 0; k < times.size(); ++k) parts[i].sum += percent_error(p[k], t[k]);
    parts[i].count = static_cast<double>(times.size());
  });
  const Tally total = reduce(parts);
  return total.sum / total.count;
}

double eval_type_error(const LatentModel& model, std::span<const double> params,
                       std::span<const EventSequence> sequences, const SolverOptions& solver) {
  if (!model.config().marks.is_discrete()) {
    throw SchemaError("type error needs a discrete mark space");
  }
  std::vector<Tally> parts(sequences.size());
  parallel_for(sequences.size(), [&](std::size_t i, std::size_t) {
    const EventSequence& seq = sequences[i];
    const auto states = event_states(model, params, seq, solver);
    LatentModel::Workspace ws;
    for (std::size_t j = 0; j < seq.events.size(); ++j) {
      const auto probs = model.type_probabilities(params, states[j], ws);
      const auto best = static_cast<std::size_t>(
          std::max_element(probs.begin(), probs.end()) - probs.begin());
      if (best != seq.events[j].mark.type) parts[i].sum += 1.0;
    }
    parts[i].count = static_cast<double>(seq.events.size());
  });
  const Tally total = reduce(parts);
  return total.count == 0.0 ? 0.0 : 100.0 * total.sum / total.count;
}

double majority_type_error(std::span<const EventSequence> sequences) {
  std::map<std::size_t, std::size_t> counts;
  std::size_t total = 0;
  for (const EventSequence& seq : sequences) {
    for (const Event& e : seq.events) {
      ++counts[e.mark.type];
      ++total;
    }
  }
  if (total == 0) return 0.0;
  std::size_t best = 0;
  for (const auto& [type, n] : counts) best = std::max(best, n);
  return 100.0 * static_cast<double>(total - best) / static_cast<double>(total);
}

double eval_mark_mae(const LatentModel& model, std::span<const double> params,
                     std::span<const EventSequence> sequences, const SolverOptions& solver) {
  if (model.config().marks.is_discrete()) {
    throw SchemaError("mark MAE needs a continuous mark space");
  }
  std::vector<Tally> parts(sequences.size());
  parallel_for(sequences.size(), [&](std::size_t i, std::size_t) {
    const EventSequence& seq = sequences[i];
    const auto states = event_states(model, params, seq, solver);
    LatentModel::Workspace ws;
    for (std::size_t j = 0; j < seq.events.size(); ++j) {
      const auto mean = model.mixture(params, states[j], ws).expected_value();
      const auto& x = seq.events[j].mark.features;
      for (std::size_t d = 0; d < x.size(); ++d) parts[i].sum += std::abs(mean[d] - x[d]);
      parts[i].count += static_cast<double>(x.size());
    }
  });
  const Tally total = reduce(parts);
  return total.count == 0.0 ? 0.0 : total.sum / total.count;
}

double running_mean_mark_mae(std::span<const EventSequence> sequences) {
  Tally total;
  for (const EventSequence& seq : sequences) {
    std::vector<double> sum;
    for (std::size_t j = 0; j < seq.events.size(); ++j) {
      const auto& x = seq.events[j].mark.features;
      sum.resize(x.size(), 0.0);
      for (std::size_t d = 0; d < x.size(); ++d) {
        const double predicted = j == 0 ? 0.0 : sum[d] / static_cast<double>(j);
        total.sum += std::abs(predicted - x[d]);
        sum[d] += x[d];
      }
      total.count += static_cast<double>(x.size());
    }
  }
  return total.count == 0.0 ? 0.0 : total.sum / total.count;
}

}  // namespace jumpflow
