#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace jumpflow {

enum class OutputActivation { identity, softplus };

/// Fully connected network with CELU hidden activations.
///
/// The network only describes the architecture; its parameters live in an
/// external flat array so that several networks can share one optimizer
/// vector. Flattening order, per layer l = 0..L-1:
///
///   W_l  (rows = widths[l+1], cols = widths[l], row-major), then b_l.
///
/// forward/vjp never mutate the network and may run concurrently as long as
/// each thread owns its Tape.
class Mlp {
 public:
  /// Activations recorded by a forward sweep, reused by vjp.
  struct Tape {
    std::vector<std::vector<double>> pre;   // pre-activation per layer
    std::vector<std::vector<double>> post;  // post[0] = input
    mutable std::vector<double> delta, upstream;  // vjp scratch
    std::span<const double> output() const { return post.back(); }
  };

  Mlp() = default;
  explicit Mlp(std::vector<std::size_t> widths,
               OutputActivation output = OutputActivation::identity);

  const std::vector<std::size_t>& widths() const noexcept { return widths_; }
  std::size_t input_width() const noexcept { return widths_.front(); }
  std::size_t output_width() const noexcept { return widths_.back(); }
  std::size_t num_layers() const noexcept { return widths_.size() - 1; }
  std::size_t param_count() const noexcept { return param_count_; }
  OutputActivation output_activation() const noexcept { return output_; }

  std::size_t weight_offset(std::size_t layer) const { return offsets_.at(layer); }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_.at(layer) + widths_[layer + 1] * widths_[layer];
  }

  std::vector<double> forward(std::span<const double> params,
                              std::span<const double> x) const;

  /// Forward sweep that records activations; the output is tape.output().
  void forward(std::span<const double> params, std::span<const double> x,
               Tape& tape) const;

  /// Accumulates v . d(out)/dx into dx and v . d(out)/dparams into dparams.
  /// Either span may be empty to skip that product.
  void vjp(std::span<const double> params, const Tape& tape,
           std::span<const double> v, std::span<double> dx,
           std::span<double> dparams) const;

  /// Returns (v . d(out)/dx, v . d(out)/dparams) from a fresh forward sweep.
  std::pair<std::vector<double>, std::vector<double>> vjp(
      std::span<const double> params, std::span<const double> x,
      std::span<const double> v) const;

  /// Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) for every weight and bias.
  void init_uniform(std::span<double> params, std::mt19937_64& rng) const;

 private:
  void check_params(std::span<const double> params) const;

  std::vector<std::size_t> widths_{1, 1};
  std::vector<std::size_t> offsets_{0};
  std::size_t param_count_ = 2;
  OutputActivation output_ = OutputActivation::identity;
};

}  // namespace jumpflow
