#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace jumpflow {

/// dy/dt = field(t, y), written into dydt.
using VectorField =
    std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;

struct SolverOptions {
  double rtol = 1e-6;
  double atol = 1e-8;
  double safety = 0.9;
  double min_factor = 0.2;
  double max_factor = 5.0;
  double initial_step = 0.0;  // 0 selects automatically
  std::size_t max_steps = 50'000'000;
};

struct SolverStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t evaluations = 0;

  SolverStats& operator+=(const SolverStats& other) {
    accepted += other.accepted;
    rejected += other.rejected;
    evaluations += other.evaluations;
    return *this;
  }
};

/// Integration failure: step size underflow or a non-finite derivative.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double time, std::vector<double> state = {})
      : std::runtime_error(what), time_(time), state_(std::move(state)) {}
  double time() const noexcept { return time_; }
  const std::vector<double>& state() const noexcept { return state_; }

 private:
  double time_;
  std::vector<double> state_;
};

/// Adaptive Dormand-Prince 5(4) integrator with a PI step controller.
///
/// The integrator is stateful so that callers can interleave steps with
/// discontinuous state updates (jumps). A step never crosses the limit passed
/// to step_toward(); when the proposed step would reach it, the step is
/// shortened to land on the limit and the returned time equals it bit-exactly.
/// Integration runs backward when the limit is below the current time.
///
/// Error control uses the max norm of err_i / (atol + rtol * max(|y0_i|, |y1_i|)).
class DormandPrince {
 public:
  DormandPrince(std::size_t dim, VectorField field, SolverOptions options = {});

  /// Starts a new integration. span_hint sets the step underflow threshold
  /// (1e-12 * span_hint).
  void reset(double t, std::span<const double> y, double span_hint);

  /// Replaces the state at the current time (jump); invalidates FSAL data.
  void set_state(std::span<const double> y);

  /// Takes one accepted step toward t_limit; returns the new time.
  double step_toward(double t_limit);

  /// Steps until the current time equals t_target exactly.
  void advance_to(double t_target);

  double time() const noexcept { return t_; }
  std::span<const double> state() const noexcept { return y_; }
  std::size_t dim() const noexcept { return dim_; }
  const SolverStats& stats() const noexcept { return stats_; }
  const SolverOptions& options() const noexcept { return options_; }

 private:
  void eval(double t, std::span<const double> y, std::span<double> out);
  double initial_step(double direction);
  double error_norm() const;

  std::size_t dim_;
  VectorField field_;
  SolverOptions options_;
  SolverStats stats_;

  double t_ = 0.0;
  double h_ = 0.0;  // proposed step magnitude
  double err_old_ = 1e-4;
  double min_step_ = 0.0;
  bool have_k1_ = false;

  std::vector<double> y_, y_new_, tmp_, err_;
  std::vector<std::vector<double>> k_;
};

struct OdeProblem {
  VectorField field;
  std::vector<double> initial_state;
  double t_start = 0.0;
  double t_end = 1.0;
  double rtol = 1e-6;
  double atol = 1e-8;
  std::vector<double> landing_times;  // sorted in integration direction
};

struct Trajectory {
  std::vector<double> step_times;  // accepted step end times
  std::vector<double> landing_times;
  std::vector<std::vector<double>> landing_states;
  std::vector<double> final_state;
  SolverStats stats;
};

/// Adaptive integration of problem over [t_start, t_end] (either direction),
/// landing exactly on every requested landing time.
Trajectory integrate(const OdeProblem& problem);

/// One Dormand-Prince step of signed size dt with no error control; returns
/// the fifth-order solution.
std::vector<double> step_dense(std::span<const double> state, double t, double dt,
                               const VectorField& field);

}  // namespace jumpflow
