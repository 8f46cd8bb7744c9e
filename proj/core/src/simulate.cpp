#include <algorithm>
#include <random>
#include <sstream>

#include "jumpflow/errors.hpp"
#include "jumpflow/model.hpp"

namespace jumpflow {

EventSequence LatentModel::simulate(std::span<const double> params, double t0, double t_end,
                                    std::span<const double> z0, std::uint64_t seed,
                                    const SimulateOptions& options) const {
  if (!(t0 <= t_end)) throw std::invalid_argument("simulate: t0 must not exceed t_end");
  EventSequence seq;
  seq.t_start = t0;
  seq.t_end = t_end;
  if (t0 == t_end) return seq;

  const std::size_t n = state_dim();
  const std::span<const double> start = z0.empty() ? initial_state(params) : z0;
  if (start.size() != n) throw DimensionError("simulate: initial state width mismatch");

  Workspace flow_ws, ws;
  DormandPrince solver(
      n,
      [&](double, std::span<const double> y, std::span<double> dy) {
        flow(params, y, dy, flow_ws);
      },
      options.solver);
  solver.reset(t0, start, t_end - t0);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> delta(n), next(n);

  auto check = [&](double lambda, double t) {
    if (!(lambda <= options.max_intensity)) {
      std::ostringstream os;
      os << "simulated intensity " << lambda << " exceeds " << options.max_intensity
         << " at t=" << t << "; the learned dynamics diverge";
      throw DivergenceError(os.str(), t);
    }
  };

  while (solver.time() < t_end) {
    const double t = solver.time();
    const double lambda = intensity(params, solver.state(), ws).total;
    check(lambda, t);
    double bound = std::max(2.0 * lambda, 1e-12);

    // Propose from a constant majorant over the next solver step; if the
    // intensity at the end of the step exceeds the majorant, redo the step
    // with a larger one.
    double candidate = 0.0;
    double landed = 0.0;
    double lambda_end = 0.0;
    while (true) {
      std::exponential_distribution<double> gap(bound);
      candidate = t + gap(rng);
      const double limit = std::min(candidate, t_end);
      DormandPrince snapshot = solver;
      landed = solver.step_toward(limit);
      lambda_end = intensity(params, solver.state(), ws).total;
      check(lambda_end, landed);
      if (lambda_end <= bound) break;
      solver = std::move(snapshot);
      bound = 2.0 * lambda_end;
    }

    if (landed == candidate && candidate <= t_end && unif(rng) * bound <= lambda_end) {
      const auto left = solver.state();
      Event event;
      event.time = landed;
      event.mark = sample_mark(params, left, rng, ws);
      jump(params, left, event.mark, delta, ws);
      for (std::size_t k = 0; k < n; ++k) next[k] = left[k] + delta[k];
      solver.set_state(next);
      seq.events.push_back(std::move(event));
    }
  }
  return seq;
}

}  // namespace jumpflow
