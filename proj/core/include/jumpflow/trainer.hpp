#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "jumpflow/adjoint.hpp"
#include "jumpflow/events.hpp"
#include "jumpflow/model.hpp"
#include "jumpflow/param_vector.hpp"

namespace jumpflow {

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double train_fraction = 0.6;
  double validation_fraction = 0.2;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  std::size_t grid_points = 500;  // checkpoints for the compensator
  std::size_t patience = 10;      // epochs without validation improvement
  bool grid_jitter = true;        // random grid phase per training sequence, see make_grid
  // Replaces AdjointOptions::compensator during training. The grid trapezoid
  // can be gamed by an intensity that dips right after each jump and recovers
  // before the next node, so training integrates the compensator exactly.
  Compensator compensator = Compensator::exact;

  /// Throws SchemaError on fractions that do not sum to 1 or negative rates.
  void validate() const;
};

/// Disjoint sequence index sets covering the corpus.
struct Split {
  std::vector<std::size_t> train, validation, test;
};

/// Shuffles 0..count-1 with the config seed and cuts it by the split
/// fractions (validation and test sizes rounded, train takes the rest).
Split split_indices(std::size_t count, const TrainConfig& config);

struct EpochLog {
  std::size_t epoch = 0;
  double train_nll = 0.0;       // mean per sequence over the epoch's batches
  double validation_nll = 0.0;  // mean per sequence at the end of the epoch
  double learning_rate = 0.0;
  double wall_seconds = 0.0;    // since training started
  SolverStats stats;
};

struct TrainResult {
  ParamVector best_params;
  std::vector<std::vector<double>> trajectory;  // parameters after every epoch
  std::vector<EpochLog> logs;
  Split split;
  std::size_t best_epoch = 0;
  double best_validation_nll = 0.0;
  std::size_t recoveries = 0;  // learning-rate halvings after non-finite losses
  bool stopped_early = false;
  SolverStats stats;
};

/// Raised after the third consecutive recovery from a non-finite loss.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BatchResult {
  LossReport loss;
  std::vector<double> grad;
  SolverStats stats;
};

/// Summed loss and gradient over dataset[indices]. Sequences are processed in
/// parallel and their gradients added in index order, so the result does not
/// depend on the thread count. `phases` holds one grid phase per index, or is
/// empty for the unshifted grid.
BatchResult batch_loss_and_grad(const LatentModel& model, std::span<const double> params,
                                std::span<const EventSequence> dataset,
                                std::span<const std::size_t> indices,
                                std::size_t grid_points, const AdjointOptions& options = {},
                                std::span<const double> phases = {});

/// Summed forward loss over dataset[indices].
LossReport dataset_loss(const LatentModel& model, std::span<const double> params,
                        std::span<const EventSequence> dataset,
                        std::span<const std::size_t> indices, std::size_t grid_points,
                        const AdjointOptions& options = {});

using EpochCallback = std::function<void(const EpochLog&)>;

/// Adam with decoupled weight decay over shuffled mini-batches, early stopping
/// on validation NLL. A non-finite loss restores the parameters from before
/// the failing step and halves the learning rate, at most three times.
TrainResult train(const LatentModel& model, const TrainConfig& config,
                  std::span<const EventSequence> dataset, const AdjointOptions& options = {},
                  const EpochCallback& on_epoch = {},
                  std::optional<ParamVector> initial = std::nullopt);

}  // namespace jumpflow
