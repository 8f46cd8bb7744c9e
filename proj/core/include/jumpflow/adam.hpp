#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace jumpflow {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled: theta *= 1 - lr * wd before the step
};

/// Adam with decoupled weight decay. With weight_decay = 0 this is plain Adam.
class AdamW {
 public:
  struct State {
    std::vector<double> m, v;
    std::size_t steps = 0;
  };

  AdamW(std::size_t size, AdamOptions options);

  void step(std::span<double> params, std::span<const double> grad);

  double learning_rate() const noexcept { return options_.learning_rate; }
  void set_learning_rate(double lr) noexcept { options_.learning_rate = lr; }
  const AdamOptions& options() const noexcept { return options_; }

  const State& state() const noexcept { return state_; }
  void restore(const State& state);

 private:
  AdamOptions options_;
  State state_;
};

}  // namespace jumpflow
