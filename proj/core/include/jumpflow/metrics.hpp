#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "jumpflow/classical.hpp"
#include "jumpflow/events.hpp"
#include "jumpflow/model.hpp"

namespace jumpflow {

struct MetricReport {
  std::optional<double> intensity_mape;       // percent
  std::optional<double> type_error;           // percent
  std::optional<double> type_error_baseline;  // majority class, percent
  std::optional<double> mark_mae;
  std::optional<double> mark_mae_baseline;    // running mean of past features
  std::optional<double> nll;                  // mean per sequence
};

/// `points` uniformly spaced times on [t_start, t_end], both ends included.
std::vector<double> uniform_grid(double t_start, double t_end, std::size_t points);

/// Model intensity lambda(z(t)) at sorted query times, using left limits at
/// event times (the same convention as the ground truth).
std::vector<double> model_intensity_trace(const LatentModel& model,
                                          std::span<const double> params,
                                          const EventSequence& seq,
                                          std::span<const double> times,
                                          const SolverOptions& solver = {});

struct IntensityTrace {
  std::vector<double> times, model, truth;
};

IntensityTrace intensity_trace(const LatentModel& model, std::span<const double> params,
                               const ClassicalProcessSpec& truth, const EventSequence& seq,
                               std::size_t points, const SolverOptions& solver = {});

/// mean |model - truth| / truth * 100 over the uniform grid and all sequences.
double eval_intensity_mape(const LatentModel& model, std::span<const double> params,
                           const ClassicalProcessSpec& truth,
                           std::span<const EventSequence> sequences, std::size_t points = 2000,
                           const SolverOptions& solver = {});

/// Same metric for a classical process used as the predictor.
double classical_intensity_mape(const ClassicalProcessSpec& predictor,
                                const ClassicalProcessSpec& truth,
                                std::span<const EventSequence> sequences,
                                std::size_t points = 2000);

/// Percentage of events whose type is not argmax_k p(k | z(tau_j)).
double eval_type_error(const LatentModel& model, std::span<const double> params,
                       std::span<const EventSequence> sequences,
                       const SolverOptions& solver = {});

/// Error rate of always predicting the most frequent type in `sequences`.
double majority_type_error(std::span<const EventSequence> sequences);

/// Mean absolute error of the mixture mean against each event's features,
/// averaged over events and feature dimensions.
double eval_mark_mae(const LatentModel& model, std::span<const double> params,
                     std::span<const EventSequence> sequences, const SolverOptions& solver = {});

/// Same error for predicting the mean of the features seen earlier in the
/// sequence (zero for the first event).
double running_mean_mark_mae(std::span<const EventSequence> sequences);

}  // namespace jumpflow
