#include "jumpflow/adam.hpp"

#include <cmath>

#include "jumpflow/errors.hpp"

namespace jumpflow {

AdamW::AdamW(std::size_t size, AdamOptions options) : options_(options) {
  state_.m.assign(size, 0.0);
  state_.v.assign(size, 0.0);
}

void AdamW::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != state_.m.size() || grad.size() != state_.m.size()) {
    throw DimensionError("AdamW: parameter/gradient width differs from optimizer state");
  }
  ++state_.steps;
  const double lr = options_.learning_rate;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state_.steps));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state_.steps));
  const double decay = 1.0 - lr * options_.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    state_.m[i] = b1 * state_.m[i] + (1.0 - b1) * grad[i];
    state_.v[i] = b2 * state_.v[i] + (1.0 - b2) * grad[i] * grad[i];
    const double m_hat = state_.m[i] / c1;
    const double v_hat = state_.v[i] / c2;
    if (options_.weight_decay != 0.0) params[i] *= decay;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + options_.epsilon);
  }
}

void AdamW::restore(const State& state) {
  if (state.m.size() != state_.m.size() || state.v.size() != state_.v.size()) {
    throw DimensionError("AdamW: restored state has the wrong width");
  }
  state_ = state;
}

}  // namespace jumpflow
