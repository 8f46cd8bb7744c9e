#include "jumpflow/adjoint.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "jumpflow/errors.hpp"

namespace jumpflow {

LossReport& LossReport::operator+=(const LossReport& other) {
  intensity_term += other.intensity_term;
  mark_term += other.mark_term;
  compensator += other.compensator;
  total += other.total;
  return *this;
}

namespace {

std::vector<LatentModel::SweepNode> sweep_nodes(const EventSequence& seq,
                                                const CheckpointGrid& grid) {
  std::vector<LatentModel::SweepNode> nodes;
  nodes.reserve(grid.nodes.size());
  for (const GridNode& g : grid.nodes) {
    LatentModel::SweepNode node{g.time, nullptr};
    if (g.event >= 0) {
      if (static_cast<std::size_t>(g.event) >= seq.events.size()) {
        throw InvariantError("grid references an event the sequence does not have");
      }
      node.event = &seq.events[static_cast<std::size_t>(g.event)];
    }
    nodes.push_back(node);
  }
  return nodes;
}

void check_window(const EventSequence& seq, const CheckpointGrid& grid) {
  if (grid.t_start != seq.t_start || grid.t_end != seq.t_end) {
    throw SchemaError("checkpoint grid window differs from the sequence window");
  }
  for (const Event& e : seq.events) {
    if (e.time < seq.t_start || e.time > seq.t_end) {
      std::ostringstream os;
      os << "event at t=" << e.time << " outside window [" << seq.t_start << ", "
         << seq.t_end << "]";
      throw SchemaError(os.str());
    }
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

void lift_adjoint(const LatentModel& model, std::span<const double> params,
                  std::span<const double> left, const Mark& mark, std::span<double> a,
                  std::span<double> dtheta, LatentModel::Workspace& ws) {
  std::vector<double> lifted(a.size(), 0.0);
  model.jump_vjp(params, left, mark, a, lifted, dtheta, ws);
  for (std::size_t k = 0; k < a.size(); ++k) a[k] += lifted[k];
}

ForwardResult forward_loss(const LatentModel& model, std::span<const double> params,
                           const EventSequence& seq, const CheckpointGrid& grid,
                           const AdjointOptions& options) {
  check_window(seq, grid);
  const std::size_t n = model.state_dim();
  const std::size_t count = grid.nodes.size();
  ForwardResult out;
  out.record.state_dim = n;
  out.record.left_states.resize(count * n);
  out.record.lambda_left.resize(count);
  out.record.lambda_right.resize(count);

  const auto nodes = sweep_nodes(seq, grid);
  LatentModel::Workspace ws;
  LossReport& loss = out.loss;
  const bool exact = options.compensator == Compensator::exact;
  double integral = 0.0;
  out.stats = model.sweep(
      params, seq.t_start, model.initial_state(params), nodes, options.forward,
      [&](std::size_t i, std::span<const double> left, std::span<const double> right) {
        std::copy(left.begin(), left.end(), out.record.left_states.begin() + i * n);
        const GridNode& node = grid.nodes[i];
        const double lam_left = model.intensity(params, left, ws).total;
        double lam_right = lam_left;
        if (node.event >= 0) {
          const auto [nll_lambda, nll_mark] = model.event_nll(
              params, left, seq.events[static_cast<std::size_t>(node.event)].mark, {}, {}, ws);
          loss.intensity_term += nll_lambda;
          loss.mark_term += nll_mark;
          lam_right = model.intensity(params, right, ws).total;
        }
        out.record.lambda_left[i] = lam_left;
        out.record.lambda_right[i] = lam_right;
        if (!exact) loss.compensator += node.weight_left * lam_left + node.weight_right * lam_right;
      },
      exact ? &integral : nullptr);
  if (exact) loss.compensator = integral;
  loss.total = loss.intensity_term + loss.mark_term + loss.compensator;
  if (!std::isfinite(loss.total)) {
    throw SolverError("non-finite negative log-likelihood", seq.t_end);
  }
  return out;
}

Gradients backward_grads(const LatentModel& model, std::span<const double> params,
                         const EventSequence& seq, const CheckpointGrid& grid,
                         const ForwardRecord& record, const AdjointOptions& options) {
  check_window(seq, grid);
  const std::size_t n = model.state_dim();
  const std::size_t count = grid.nodes.size();
  if (record.state_dim != n || record.left_states.size() != count * n ||
      record.lambda_left.size() != count || record.lambda_right.size() != count) {
    throw InvariantError("forward record is missing recorded left limits for this grid");
  }
  const bool exact = options.compensator == Compensator::exact;
  // Parameters with a continuous adjoint: the flow and decay networks, plus,
  // when the compensator is a running cost, everything up to the end of the
  // intensity network (the jump block in between just stays zero).
  const std::size_t flow_params =
      exact ? model.initial_state_offset() : model.flow_param_count();

  Gradients out;
  out.dtheta.assign(model.param_count(), 0.0);
  out.devent_times.assign(seq.events.size(), 0.0);

  // Augmented backward state y = [z, a, a_theta(parameter prefix)]. The
  // remaining parameters only receive gradient at nodes, accumulated directly
  // into dtheta.
  const std::size_t dim = 2 * n + flow_params;
  std::vector<double> y(dim, 0.0);
  auto z = std::span<double>(y).first(n);
  auto a = std::span<double>(y).subspan(n, n);
  auto a_theta = std::span<double>(y).subspan(2 * n, flow_params);
  const std::span<double> dtheta(out.dtheta);

  LatentModel::Workspace field_ws, ws;
  std::vector<double> neg_a(n);
  const VectorField field = [&](double, std::span<const double> s, std::span<double> ds) {
    const auto zs = s.first(n);
    const auto as = s.subspan(n, n);
    for (std::size_t i = 0; i < n; ++i) neg_a[i] = -as[i];
    auto dz = ds.first(n);
    auto da = ds.subspan(n, n);
    auto dth = ds.subspan(2 * n, flow_params);
    std::fill(da.begin(), da.end(), 0.0);
    std::fill(dth.begin(), dth.end(), 0.0);
    model.flow_vjp(params, zs, neg_a, da, dth, field_ws, dz);
    if (exact) model.intensity_grad(params, zs, -1.0, da, dth, field_ws);
  };

  std::vector<double> delta(n), right(n), f_left(n), f_right(n);

  // Applies the loss gradients and the adjoint lift at node i. On entry z is
  // the recomputed state (right limit at events) and a the adjoint excluding
  // node i; on exit z is the left limit and a = a(t_i).
  auto process_node = [&](std::size_t i) {
    const GridNode& node = grid.nodes[i];
    const auto left = record.left(i);
    if (node.event < 0) {
      for (std::size_t k = 0; k < n; ++k) {
        out.max_recompute_error = std::max(out.max_recompute_error, std::abs(z[k] - left[k]));
      }
      if (options.reset_state_at_checkpoints) std::copy(left.begin(), left.end(), z.begin());
      if (!exact) {
        model.intensity_grad(params, z, node.weight_left + node.weight_right, a, dtheta, ws);
      }
      return;
    }

    const std::size_t j = static_cast<std::size_t>(node.event);
    const Mark& mark = seq.events[j].mark;
    model.jump(params, left, mark, delta, ws);
    for (std::size_t k = 0; k < n; ++k) {
      right[k] = left[k] + delta[k];
      out.max_recompute_error = std::max(out.max_recompute_error, std::abs(z[k] - right[k]));
    }

    // Adjoint of the downstream trajectory at tau+, used by dL/dtau below.
    std::vector<double> a_after(a.begin(), a.end());
    if (!exact && node.weight_right != 0.0) {
      model.intensity_grad(params, right, node.weight_right, a, dtheta, ws);
    }

    // (1) reverse the jump with the recorded left limit, (2) lift the
    // adjoint, (3) add the direct loss terms evaluated at the left limit.
    std::copy(left.begin(), left.end(), z.begin());
    auto inject = [&] {
      if (!exact && node.weight_left != 0.0) {
        model.intensity_grad(params, left, node.weight_left, a, dtheta, ws);
      }
      model.event_nll(params, left, mark, a, dtheta, ws);
    };
    switch (options.lift) {
      case LiftMode::exact:
        lift_adjoint(model, params, left, mark, a, dtheta, ws);
        inject();
        break;
      case LiftMode::misordered:
        inject();
        lift_adjoint(model, params, left, mark, a, dtheta, ws);
        break;
      case LiftMode::disabled:
        inject();
        break;
    }

    model.flow(params, left, f_left, ws);
    model.flow(params, right, f_right, ws);
    // Moving the event changes the compensator: the exact integral trades
    // lambda+ for lambda- over the shift, the trapezoid moves its weights.
    double weight_shift = record.lambda_left[i] - record.lambda_right[i];
    if (!exact) {
      weight_shift = 0.0;
      if (i > 0) weight_shift += 0.5 * (record.lambda_right[i - 1] + record.lambda_left[i]);
      if (i + 1 < count) {
        weight_shift -= 0.5 * (record.lambda_right[i] + record.lambda_left[i + 1]);
      }
    }
    out.devent_times[j] = dot(a, f_left) - dot(a_after, f_right) + weight_shift;
  };

  DormandPrince solver(dim, field, options.backward);
  const std::size_t last = count - 1;
  {
    const auto left = record.left(last);
    std::copy(left.begin(), left.end(), z.begin());
    if (grid.nodes[last].event >= 0) {
      model.jump(params, left, seq.events[static_cast<std::size_t>(grid.nodes[last].event)].mark,
                 delta, ws);
      for (std::size_t k = 0; k < n; ++k) z[k] += delta[k];
    }
  }
  process_node(last);
  solver.reset(grid.nodes[last].time, y, std::max(seq.t_end - seq.t_start, 1e-300));

  double a_before_first = 0.0;
  for (std::size_t i = last; i-- > 0;) {
    solver.advance_to(grid.nodes[i].time);
    std::copy(solver.state().begin(), solver.state().end(), y.begin());
    if (i == 0) {
      model.flow(params, z, f_left, ws);
      a_before_first = dot(a, f_left);
    }
    process_node(i);
    solver.set_state(y);
  }
  if (count == 1) {
    model.flow(params, z, f_left, ws);
    a_before_first = dot(a, f_left);
  }

  out.dz0.assign(a.begin(), a.end());
  for (std::size_t k = 0; k < flow_params; ++k) out.dtheta[k] += a_theta[k];
  for (std::size_t k = 0; k < n; ++k) out.dtheta[model.initial_state_offset() + k] += a[k];
  // Moving t0 with z(t0) held fixed delays the whole trajectory and shrinks
  // the first quadrature segment.
  out.dt0 = -a_before_first;
  if (exact) {
    out.dt0 -= record.lambda_right[0];
  } else if (count > 1) {
    out.dt0 -= 0.5 * (record.lambda_right[0] + record.lambda_left[1]);
  }
  out.stats = solver.stats();

  for (double g : out.dtheta) {
    if (!std::isfinite(g)) throw SolverError("non-finite gradient in adjoint pass", seq.t_start);
  }
  return out;
}

std::pair<LossReport, Gradients> loss_and_gradients(const LatentModel& model,
                                                    std::span<const double> params,
                                                    const EventSequence& seq,
                                                    std::size_t checkpoints,
                                                    const AdjointOptions& options,
                                                    double phase) {
  const CheckpointGrid grid = make_grid(seq, checkpoints, phase);
  ForwardResult fwd = forward_loss(model, params, seq, grid, options);
  Gradients grads = backward_grads(model, params, seq, grid, fwd.record, options);
  grads.stats += fwd.stats;
  return {fwd.loss, std::move(grads)};
}

}  // namespace jumpflow
