#include "jumpflow/mlp.hpp"

#include <cmath>
#include <string>

#include "jumpflow/activations.hpp"
#include "jumpflow/errors.hpp"

namespace jumpflow {

Mlp::Mlp(std::vector<std::size_t> widths, OutputActivation output)
    : widths_(std::move(widths)), output_(output) {
  if (widths_.size() < 2) {
    throw DimensionError("Mlp needs at least an input and an output width");
  }
  for (std::size_t w : widths_) {
    if (w == 0) throw DimensionError("Mlp layer widths must be positive");
  }
  offsets_.clear();
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    offsets_.push_back(offset);
    offset += widths_[l + 1] * widths_[l] + widths_[l + 1];
  }
  param_count_ = offset;
}

void Mlp::check_params(std::span<const double> params) const {
  if (params.size() != param_count_) {
    throw DimensionError("Mlp expects " + std::to_string(param_count_) +
                         " parameters, got " + std::to_string(params.size()));
  }
}

std::vector<double> Mlp::forward(std::span<const double> params,
                                 std::span<const double> x) const {
  Tape tape;
  forward(params, x, tape);
  return tape.post.back();
}

void Mlp::forward(std::span<const double> params, std::span<const double> x,
                  Tape& tape) const {
  check_params(params);
  if (x.size() != input_width()) {
    throw DimensionError("Mlp layer 0: input width " + std::to_string(x.size()) +
                         " != expected " + std::to_string(input_width()));
  }
  const std::size_t layers = num_layers();
  tape.pre.resize(layers);
  tape.post.resize(layers + 1);
  tape.post[0].assign(x.begin(), x.end());

  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = widths_[l];
    const std::size_t out = widths_[l + 1];
    const double* w = params.data() + weight_offset(l);
    const double* b = params.data() + bias_offset(l);
    const std::vector<double>& input = tape.post[l];
    std::vector<double>& pre = tape.pre[l];
    std::vector<double>& post = tape.post[l + 1];
    pre.resize(out);
    post.resize(out);
    for (std::size_t i = 0; i < out; ++i) {
      double acc = b[i];
      const double* row = w + i * in;
      for (std::size_t j = 0; j < in; ++j) acc += row[j] * input[j];
      pre[i] = acc;
    }
    const bool last = (l + 1 == layers);
    for (std::size_t i = 0; i < out; ++i) {
      if (!last) {
        post[i] = celu(pre[i]);
      } else if (output_ == OutputActivation::softplus) {
        post[i] = softplus(pre[i]);
      } else {
        post[i] = pre[i];
      }
    }
  }
}

void Mlp::vjp(std::span<const double> params, const Tape& tape,
              std::span<const double> v, std::span<double> dx,
              std::span<double> dparams) const {
  check_params(params);
  const std::size_t layers = num_layers();
  if (tape.post.size() != layers + 1) {
    throw DimensionError("Mlp vjp: tape does not belong to this network");
  }
  if (v.size() != output_width()) {
    throw DimensionError("Mlp layer " + std::to_string(layers - 1) +
                         ": cotangent width " + std::to_string(v.size()) +
                         " != output width " + std::to_string(output_width()));
  }
  if (!dx.empty() && dx.size() != input_width()) {
    throw DimensionError("Mlp layer 0: dx width mismatch");
  }
  if (!dparams.empty() && dparams.size() != param_count_) {
    throw DimensionError("Mlp vjp: dparams size mismatch");
  }

  // delta holds the cotangent of the current layer's pre-activation.
  std::vector<double>& delta = tape.delta;
  std::vector<double>& upstream = tape.upstream;
  delta.assign(v.begin(), v.end());
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t in = widths_[l];
    const std::size_t out = widths_[l + 1];
    const std::vector<double>& pre = tape.pre[l];
    const bool last = (l + 1 == layers);
    for (std::size_t i = 0; i < out; ++i) {
      if (!last) {
        delta[i] *= celu_grad(pre[i]);
      } else if (output_ == OutputActivation::softplus) {
        delta[i] *= softplus_grad(pre[i]);
      }
    }
    const double* w = params.data() + weight_offset(l);
    const std::vector<double>& input = tape.post[l];
    if (!dparams.empty()) {
      double* dw = dparams.data() + weight_offset(l);
      double* db = dparams.data() + bias_offset(l);
      for (std::size_t i = 0; i < out; ++i) {
        const double d = delta[i];
        if (d == 0.0) continue;
        double* row = dw + i * in;
        for (std::size_t j = 0; j < in; ++j) row[j] += d * input[j];
        db[i] += d;
      }
    }
    if (l == 0 && dx.empty()) break;
    upstream.assign(in, 0.0);
    for (std::size_t i = 0; i < out; ++i) {
      const double d = delta[i];
      if (d == 0.0) continue;
      const double* row = w + i * in;
      for (std::size_t j = 0; j < in; ++j) upstream[j] += d * row[j];
    }
    if (l == 0) {
      for (std::size_t j = 0; j < in; ++j) dx[j] += upstream[j];
    } else {
      delta.swap(upstream);
    }
  }
}

std::pair<std::vector<double>, std::vector<double>> Mlp::vjp(
    std::span<const double> params, std::span<const double> x,
    std::span<const double> v) const {
  Tape tape;
  forward(params, x, tape);
  std::vector<double> dx(input_width(), 0.0);
  std::vector<double> dparams(param_count_, 0.0);
  vjp(params, tape, v, dx, dparams);
  return {std::move(dx), std::move(dparams)};
}

void Mlp::init_uniform(std::span<double> params, std::mt19937_64& rng) const {
  if (params.size() != param_count_) {
    throw DimensionError("Mlp init: parameter span size mismatch");
  }
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const double bound = std::sqrt(1.0 / static_cast<double>(widths_[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    const std::size_t begin = weight_offset(l);
    const std::size_t end = bias_offset(l) + widths_[l + 1];
    for (std::size_t i = begin; i < end; ++i) params[i] = dist(rng);
  }
}

}  // namespace jumpflow
