#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "jumpflow/events.hpp"
#include "jumpflow/model.hpp"
#include "jumpflow/ode.hpp"

namespace jumpflow {

/// One quadrature/landing node. The compensator is a trapezoid rule over the
/// union of checkpoints and event times in which every segment uses the
/// intensity at its left end's right limit and at its right end's left limit,
/// so jumps in the intensity at events are integrated exactly for
/// piecewise-linear intensities.
struct GridNode {
  double time = 0.0;
  double weight_left = 0.0;   // multiplies lambda(z(t))   (left limit)
  double weight_right = 0.0;  // multiplies lambda(z(t+))  (right limit)
  std::ptrdiff_t event = -1;  // index into the sequence's events, or -1
  bool checkpoint = false;
};

struct CheckpointGrid {
  double t_start = 0.0;
  double t_end = 0.0;
  std::vector<GridNode> nodes;
};

/// `checkpoints` uniform nodes on [t_start, t_end] (both ends included) merged
/// with the event times. Throws if fewer than two checkpoints are requested.
///
/// A nonzero `phase` in [0, 1) shifts the interior nodes by phase * spacing
/// while keeping both ends, which adds one node. Training draws a fresh phase
/// per sequence and step: the internal state does not jump, so it is the same
/// clock for every sequence, and on a fixed grid the model can learn an
/// intensity that dips exactly at the nodes and underestimates the integral.
CheckpointGrid make_grid(const EventSequence& seq, std::size_t checkpoints,
                         double phase = 0.0);

/// Sum over nodes of weight_left * left + weight_right * right.
double quadrature_compensator(const CheckpointGrid& grid, std::span<const double> left,
                              std::span<const double> right);

/// Plain trapezoid rule over sorted nodes. Throws on fewer than two nodes.
double trapezoid(std::span<const double> times, std::span<const double> values);

/// Negative log-likelihood split into its three terms.
struct LossReport {
  double intensity_term = 0.0;  // -sum_j log lambda(z(tau_j))
  double mark_term = 0.0;       // -sum_j log p(k_j | z(tau_j))
  double compensator = 0.0;     // integral of lambda
  double total = 0.0;

  LossReport& operator+=(const LossReport& other);
};

/// Values kept from the forward pass for the backward pass: the left-limit
/// state and both intensity limits at every grid node, O(nodes * n) memory.
struct ForwardRecord {
  std::size_t state_dim = 0;
  std::vector<double> left_states;  // nodes x n
  std::vector<double> lambda_left, lambda_right;

  std::span<const double> left(std::size_t node) const {
    return std::span<const double>(left_states).subspan(node * state_dim, state_dim);
  }
};

struct ForwardResult {
  LossReport loss;
  ForwardRecord record;
  SolverStats stats;
};

enum class LiftMode {
  exact,       // lift a(tau+) first, then add the event's own loss gradients
  disabled,    // negative control: adjoint treated as continuous across events
  misordered,  // negative control: loss gradients added before the lift
};

/// a <- a (I + dw/dz) at the left-limit state, accumulating a . dw/dtheta
/// into dtheta.
void lift_adjoint(const LatentModel& model, std::span<const double> params,
                  std::span<const double> left, const Mark& mark, std::span<double> a,
                  std::span<double> dtheta, LatentModel::Workspace& ws);

/// How the compensator (integral of lambda) enters the loss.
enum class Compensator {
  quadrature,  // trapezoid on the grid; node gradients injected at every node
  exact,       // integrated by the solver; a running cost in the adjoint
};

struct AdjointOptions {
  SolverOptions forward;
  SolverOptions backward;
  LiftMode lift = LiftMode::exact;
  Compensator compensator = Compensator::quadrature;
  /// Restore z from the forward record at every node (events always do).
  bool reset_state_at_checkpoints = true;
};

struct Gradients {
  std::vector<double> dtheta;         // dL/dtheta, full parameter width
  std::vector<double> dz0;            // dL/dz(t0)
  double dt0 = 0.0;                   // dL/dt0 with all other node times fixed
  std::vector<double> devent_times;   // dL/dtau_j, diagnostics
  double max_recompute_error = 0.0;   // backward z vs recorded, max abs
  SolverStats stats;
};

/// Integrates the latent dynamics across the grid and evaluates the
/// negative log-likelihood. Intensity and mark probability at an event use the
/// state just before its jump.
ForwardResult forward_loss(const LatentModel& model, std::span<const double> params,
                           const EventSequence& seq, const CheckpointGrid& grid,
                           const AdjointOptions& options = {});

/// Adjoint pass: integrates (z, a, a_theta) backward from t_end, injects the
/// node gradients of the loss, and lifts the adjoint across every event.
Gradients backward_grads(const LatentModel& model, std::span<const double> params,
                         const EventSequence& seq, const CheckpointGrid& grid,
                         const ForwardRecord& record, const AdjointOptions& options = {});

/// forward_loss followed by backward_grads.
std::pair<LossReport, Gradients> loss_and_gradients(const LatentModel& model,
                                                    std::span<const double> params,
                                                    const EventSequence& seq,
                                                    std::size_t checkpoints,
                                                    const AdjointOptions& options = {},
                                                    double phase = 0.0);

}  // namespace jumpflow
