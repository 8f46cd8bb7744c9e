#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "jumpflow/events.hpp"
#include "jumpflow/mlp.hpp"
#include "jumpflow/ode.hpp"
#include "jumpflow/param_vector.hpp"

namespace jumpflow {

struct ModelConfig {
  std::size_t n1 = 3;  // internal state c
  std::size_t n2 = 2;  // event memory h
  MarkSpace marks = MarkSpace::discrete(1);
  std::vector<std::size_t> flow_hidden{20};
  std::vector<std::size_t> decay_hidden{20};
  std::vector<std::size_t> jump_hidden{20};
  std::vector<std::size_t> intensity_hidden{20};

  std::size_t state_dim() const noexcept { return n1 + n2; }
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Gaussian mixture over continuous marks; means and stdevs are G x d row-major.
struct MixtureParams {
  std::size_t components = 0;
  std::size_t dim = 0;
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> stdevs;

  std::vector<double> expected_value() const;
  double log_density(std::span<const double> x) const;
};

struct IntensityEval {
  double total = 0.0;
  std::vector<double> per_type;  // discrete marks only
};

struct SimulateOptions {
  SolverOptions solver;
  double max_intensity = 1e6;
};

/// Latent jump dynamics over z = (c, h):
///
///   dc/dt = g(z) - (g.c / max(c.c, 1e-12)) c      g = flow MLP
///   dh/dt = -softplus(decay MLP(z)) * h
///   at an event with mark k:  c += 0,  h += jump MLP(c, k)
///
/// The intensity MLP reads z and yields per-type intensities through softplus
/// (discrete marks) or a scalar intensity plus Gaussian-mixture parameters
/// (continuous marks). The networks take no explicit time input; time enters
/// only through the dynamics.
///
/// Parameter segments, in order: "flow", "decay", "jump", "intensity",
/// "initial_state". The first two form the prefix that the continuous flow
/// depends on (flow_param_count()).
class LatentModel {
 public:
  /// Per-thread scratch for network tapes.
  struct Workspace {
    Mlp::Tape flow, decay, jump, intensity;
    std::vector<double> input, cot, tmp;
  };

  explicit LatentModel(ModelConfig config);

  const ModelConfig& config() const noexcept { return config_; }
  std::size_t state_dim() const noexcept { return config_.state_dim(); }
  std::size_t param_count() const noexcept { return param_count_; }
  std::size_t flow_param_count() const noexcept { return jump_offset_; }
  std::size_t initial_state_offset() const noexcept { return initial_offset_; }

  const Mlp& flow_net() const noexcept { return flow_net_; }
  const Mlp& decay_net() const noexcept { return decay_net_; }
  const Mlp& jump_net() const noexcept { return jump_net_; }
  const Mlp& intensity_net() const noexcept { return intensity_net_; }

  /// Zeroed parameter vector with this model's segment table.
  ParamVector empty_params() const;
  /// Uniform fan-in initialization of all networks; z(t0) drawn from U(-0.5, 0.5).
  ParamVector init_params(std::uint64_t seed) const;
  /// Throws SchemaError when the segment table does not match this model.
  void check_params(const ParamVector& params) const;

  std::span<const double> initial_state(std::span<const double> params) const;

  void flow(std::span<const double> params, std::span<const double> z,
            std::span<double> dzdt, Workspace& ws) const;

  /// Accumulates v . df/dz into dz and v . df/dtheta into dtheta (either may
  /// be empty; dtheta may be the full width or the flow prefix). When dzdt is
  /// non-empty the flow itself is written there from the same forward sweep.
  void flow_vjp(std::span<const double> params, std::span<const double> z,
                std::span<const double> v, std::span<double> dz,
                std::span<double> dtheta, Workspace& ws,
                std::span<double> dzdt = {}) const;

  /// Writes the full-width jump (c block identically zero) into dz.
  void jump(std::span<const double> params, std::span<const double> z, const Mark& mark,
            std::span<double> dz, Workspace& ws) const;

  /// Accumulates v . dw/dz and v . dw/dtheta.
  void jump_vjp(std::span<const double> params, std::span<const double> z, const Mark& mark,
                std::span<const double> v, std::span<double> dz, std::span<double> dtheta,
                Workspace& ws) const;

  IntensityEval intensity(std::span<const double> params, std::span<const double> z,
                          Workspace& ws) const;

  /// Returns lambda(z) and accumulates scale * grad lambda.
  double intensity_grad(std::span<const double> params, std::span<const double> z,
                        double scale, std::span<double> dz, std::span<double> dtheta,
                        Workspace& ws) const;

  double mark_logprob(std::span<const double> params, std::span<const double> z,
                      const Mark& mark, Workspace& ws) const;

  /// -log lambda(z) - log p(mark | z); accumulates its gradient when the spans
  /// are non-empty. Returns {-log lambda, -log p}.
  std::pair<double, double> event_nll(std::span<const double> params,
                                      std::span<const double> z, const Mark& mark,
                                      std::span<double> dz, std::span<double> dtheta,
                                      Workspace& ws) const;

  /// Discrete marks: lambda_k / lambda.
  std::vector<double> type_probabilities(std::span<const double> params,
                                         std::span<const double> z, Workspace& ws) const;

  /// Continuous marks: the mixture p(k | z).
  MixtureParams mixture(std::span<const double> params, std::span<const double> z,
                        Workspace& ws) const;

  /// Samples a mark from p(k | z).
  Mark sample_mark(std::span<const double> params, std::span<const double> z,
                   std::mt19937_64& rng, Workspace& ws) const;

  struct SweepNode {
    double time = 0.0;
    const Event* event = nullptr;
  };
  /// Called at every node with the left-limit state and the state after the
  /// node's jump (identical when the node carries no event).
  using SweepVisitor = std::function<void(std::size_t node, std::span<const double> left,
                                          std::span<const double> right)>;

  /// Integrates z from `z0` at `t0` across sorted nodes (all >= t0), landing
  /// exactly on each node and applying event jumps there. With
  /// `intensity_integral` set, the integral of lambda(z(t)) up to the last
  /// node is carried as an extra solver component (under the same error
  /// control) and written there.
  SolverStats sweep(std::span<const double> params, double t0, std::span<const double> z0,
                    std::span<const SweepNode> nodes, const SolverOptions& options,
                    const SweepVisitor& visit, double* intensity_integral = nullptr) const;

  /// Samples an event sequence on [t0, t_end] by thinning against a
  /// piecewise-constant majorant of twice the current intensity. An empty z0
  /// selects the learned initial state.
  EventSequence simulate(std::span<const double> params, double t0, double t_end,
                         std::span<const double> z0, std::uint64_t seed,
                         const SimulateOptions& options = {}) const;

 private:
  void intensity_forward(std::span<const double> params, std::span<const double> z,
                         Workspace& ws) const;
  std::span<const double> net_params(std::span<const double> params, std::size_t offset,
                                     const Mlp& net) const {
    return params.subspan(offset, net.param_count());
  }
  static std::span<double> net_grad(std::span<double> dtheta, std::size_t offset,
                                    const Mlp& net) {
    return dtheta.empty() ? dtheta : dtheta.subspan(offset, net.param_count());
  }
  void encode_jump_input(std::span<const double> z, const Mark& mark,
                         std::vector<double>& out) const;

  ModelConfig config_;
  Mlp flow_net_, decay_net_, jump_net_, intensity_net_;
  std::size_t flow_offset_ = 0, decay_offset_ = 0, jump_offset_ = 0;
  std::size_t intensity_offset_ = 0, initial_offset_ = 0, param_count_ = 0;
};

}  // namespace jumpflow
