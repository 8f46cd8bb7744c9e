#include "jumpflow/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "jumpflow/adam.hpp"
#include "jumpflow/errors.hpp"
#include "jumpflow/parallel.hpp"

namespace jumpflow {

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw SchemaError("train config: " + what);
  };
  // Zero is accepted and freezes the parameters.
  require(learning_rate >= 0.0 && std::isfinite(learning_rate), "learning_rate must be >= 0");
  require(weight_decay >= 0.0 && std::isfinite(weight_decay), "weight_decay must be >= 0");
  require(beta1 > 0.0 && beta1 < 1.0, "beta1 must lie in (0, 1)");
  require(beta2 > 0.0 && beta2 < 1.0, "beta2 must lie in (0, 1)");
  require(epsilon > 0.0, "epsilon must be positive");
  require(batch_size > 0, "batch_size must be positive");
  require(grid_points >= 2, "grid_points must be >= 2");
  for (double f : {train_fraction, validation_fraction, test_fraction}) {
    require(f >= 0.0 && f <= 1.0, "split fractions must lie in [0, 1]");
  }
  require(train_fraction > 0.0, "train fraction must be positive");
  require(std::abs(train_fraction + validation_fraction + test_fraction - 1.0) <= 1e-9,
          "split fractions must sum to 1");
}

Split split_indices(std::size_t count, const TrainConfig& config) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(config.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n = static_cast<double>(count);
  const auto n_val = static_cast<std::size_t>(std::llround(config.validation_fraction * n));
  const auto n_test = std::min(count - std::min(count, n_val),
                               static_cast<std::size_t>(std::llround(config.test_fraction * n)));
  const std::size_t n_train = count - std::min(count, n_val) - n_test;
  Split split;
  split.train.assign(order.begin(), order.begin() + n_train);
  split.validation.assign(order.begin() + n_train,
                          order.begin() + n_train + std::min(count - n_train, n_val));
  split.test.assign(order.begin() + n_train + split.validation.size(), order.end());
  return split;
}

BatchResult batch_loss_and_grad(const LatentModel& model, std::span<const double> params,
                                std::span<const EventSequence> dataset,
                                std::span<const std::size_t> indices,
                                std::size_t grid_points, const AdjointOptions& options,
                                std::span<const double> phases) {
  if (!phases.empty() && phases.size() != indices.size()) {
    throw DimensionError("one grid phase per batch sequence expected");
  }
  std::vector<LossReport> losses(indices.size());
  std::vector<Gradients> grads(indices.size());
  parallel_for(indices.size(), [&](std::size_t i, std::size_t) {
    auto [loss, g] = loss_and_gradients(model, params, dataset[indices[i]], grid_points, options,
                                        phases.empty() ? 0.0 : phases[i]);
    losses[i] = loss;
    grads[i] = std::move(g);
  });
  BatchResult out;
  out.grad.assign(model.param_count(), 0.0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.loss += losses[i];
    out.stats += grads[i].stats;
    for (std::size_t k = 0; k < out.grad.size(); ++k) out.grad[k] += grads[i].dtheta[k];
  }
  return out;
}

LossReport dataset_loss(const LatentModel& model, std::span<const double> params,
                        std::span<const EventSequence> dataset,
                        std::span<const std::size_t> indices, std::size_t grid_points,
                        const AdjointOptions& options) {
  std::vector<LossReport> losses(indices.size());
  parallel_for(indices.size(), [&](std::size_t i, std::size_t) {
    const EventSequence& seq = dataset[indices[i]];
    losses[i] = forward_loss(model, params, seq, make_grid(seq, grid_points), options).loss;
  });
  LossReport total;
  for (const LossReport& l : losses) total += l;
  return total;
}

namespace {

bool finite(const BatchResult& batch) {
  if (!std::isfinite(batch.loss.total)) return false;
  return std::all_of(batch.grad.begin(), batch.grad.end(),
                     [](double g) { return std::isfinite(g); });
}

double mean_nll(const LossReport& loss, std::size_t sequences) {
  return sequences == 0 ? 0.0 : loss.total / static_cast<double>(sequences);
}

}  // namespace

TrainResult train(const LatentModel& model, const TrainConfig& config,
                  std::span<const EventSequence> dataset, const AdjointOptions& base_options,
                  const EpochCallback& on_epoch, std::optional<ParamVector> initial) {
  config.validate();
  if (dataset.empty()) throw SchemaError("training corpus is empty");
  for (const EventSequence& seq : dataset) validate_sequence(seq, model.config().marks);

  AdjointOptions options = base_options;
  options.compensator = config.compensator;
  const auto started = std::chrono::steady_clock::now();
  TrainResult result;
  result.split = split_indices(dataset.size(), config);
  if (result.split.train.empty()) throw SchemaError("training split is empty");
  const std::vector<std::size_t>& monitor =
      result.split.validation.empty() ? result.split.train : result.split.validation;

  ParamVector params = initial ? std::move(*initial) : model.init_params(config.seed);
  model.check_params(params);
  AdamW optimizer(params.size(), AdamOptions{config.learning_rate, config.beta1, config.beta2,
                                             config.epsilon, config.weight_decay});

  auto evaluate = [&](std::span<const double> p) {
    try {
      const double v =
          mean_nll(dataset_loss(model, p, dataset, monitor, config.grid_points, options),
                   monitor.size());
      return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    } catch (const SolverError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  result.best_params = params;
  result.best_validation_nll = evaluate(params.values());
  std::size_t stale = 0;
  std::mt19937_64 shuffle_rng(config.seed ^ 0x5DEECE66DULL);
  std::mt19937_64 phase_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<double> phases;
  std::vector<std::size_t> order = result.split.train;
  std::vector<double> saved_params;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochLog log;
    log.epoch = epoch;
    LossReport epoch_loss;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      saved_params.assign(params.values().begin(), params.values().end());
      const AdamW::State saved_state = optimizer.state();
      phases.clear();
      if (config.grid_jitter) {
        // 53 random bits mapped onto [0, 1).
        for (std::size_t k = 0; k < batch.size(); ++k) {
          phases.push_back(static_cast<double>(phase_rng() >> 11) * 0x1.0p-53);
        }
      }
      while (true) {
        BatchResult br;
        bool ok = true;
        try {
          br = batch_loss_and_grad(model, params.values(), dataset, batch, config.grid_points,
                                   options, phases);
          ok = finite(br);
        } catch (const SolverError&) {
          ok = false;
        }
        if (ok) {
          optimizer.step(params.values(), br.grad);
          ok = std::all_of(params.values().begin(), params.values().end(),
                           [](double v) { return std::isfinite(v); });
        }
        if (ok) {
          epoch_loss += br.loss;
          seen += batch.size();
          log.stats += br.stats;
          break;
        }
        if (result.recoveries == 3) {
          throw TrainingError("non-finite loss persisted after three learning-rate halvings");
        }
        ++result.recoveries;
        params.assign(saved_params);
        optimizer.restore(saved_state);
        optimizer.set_learning_rate(0.5 * optimizer.learning_rate());
      }
    }
    log.train_nll = mean_nll(epoch_loss, seen);
    log.validation_nll = evaluate(params.values());
    log.learning_rate = optimizer.learning_rate();
    log.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.stats += log.stats;
    result.trajectory.emplace_back(params.values().begin(), params.values().end());
    result.logs.push_back(log);
    if (on_epoch) on_epoch(log);

    if (log.validation_nll < result.best_validation_nll) {
      result.best_validation_nll = log.validation_nll;
      result.best_params = params;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= config.patience) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

}  // namespace jumpflow
