#include "jumpflow/ode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "jumpflow/errors.hpp"

namespace jumpflow {
namespace {

// Dormand-Prince 5(4) tableau.
constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
// Fifth-order weights equal the last row of kA (FSAL).
constexpr double kB[7] = {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192,
                          -2187.0 / 6784, 11.0 / 84, 0.0};
// b5 - b4
constexpr double kE[7] = {71.0 / 57600,      0.0,         -71.0 / 16695, 71.0 / 1920,
                          -17253.0 / 339200, 22.0 / 525, -1.0 / 40};

// PI controller exponents (Hairer & Wanner, DOPRI5).
constexpr double kBeta = 0.04;
constexpr double kExpo1 = 0.2 - kBeta * 0.75;

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::string describe(double t, std::span<const double> y) {
  std::ostringstream os;
  os.precision(17);
  os << "t=" << t << " state=[";
  for (std::size_t i = 0; i < y.size() && i < 8; ++i) os << (i ? ", " : "") << y[i];
  if (y.size() > 8) os << ", ...";
  os << "]";
  return os.str();
}

}  // namespace

DormandPrince::DormandPrince(std::size_t dim, VectorField field, SolverOptions options)
    : dim_(dim),
      field_(std::move(field)),
      options_(options),
      y_(dim),
      y_new_(dim),
      tmp_(dim),
      err_(dim),
      k_(7, std::vector<double>(dim)) {
  if (!(options_.rtol > 0.0) || !(options_.atol > 0.0)) {
    throw std::invalid_argument("solver tolerances must be positive");
  }
}

void DormandPrince::reset(double t, std::span<const double> y, double span_hint) {
  if (y.size() != dim_) throw DimensionError("DormandPrince::reset: state width mismatch");
  t_ = t;
  std::copy(y.begin(), y.end(), y_.begin());
  h_ = options_.initial_step;
  err_old_ = 1e-4;
  have_k1_ = false;
  min_step_ = 1e-12 * (span_hint > 0.0 ? span_hint : 1.0);
}

void DormandPrince::set_state(std::span<const double> y) {
  if (y.size() != dim_) throw DimensionError("DormandPrince::set_state: state width mismatch");
  std::copy(y.begin(), y.end(), y_.begin());
  have_k1_ = false;
}

void DormandPrince::eval(double t, std::span<const double> y, std::span<double> out) {
  field_(t, y, out);
  ++stats_.evaluations;
  if (!all_finite(out)) {
    throw SolverError("non-finite derivative at " + describe(t, y), t,
                      std::vector<double>(y.begin(), y.end()));
  }
}

double DormandPrince::initial_step(double direction) {
  auto rms = [&](std::span<const double> v) {
    double acc = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
      const double sc = options_.atol + options_.rtol * std::abs(y_[i]);
      acc += (v[i] / sc) * (v[i] / sc);
    }
    return dim_ ? std::sqrt(acc / static_cast<double>(dim_)) : 0.0;
  };
  const double d0 = rms(y_);
  const double d1 = rms(k_[0]);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  for (std::size_t i = 0; i < dim_; ++i) tmp_[i] = y_[i] + direction * h0 * k_[0][i];
  eval(t_ + direction * h0, tmp_, k_[1]);
  for (std::size_t i = 0; i < dim_; ++i) err_[i] = k_[1][i] - k_[0][i];
  const double d2 = rms(err_) / h0;
  const double dmax = std::max(d1, d2);
  const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
  return std::min(100.0 * h0, h1);
}

double DormandPrince::error_norm() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    const double sc =
        options_.atol + options_.rtol * std::max(std::abs(y_[i]), std::abs(y_new_[i]));
    worst = std::max(worst, std::abs(err_[i]) / sc);
  }
  return worst;
}

double DormandPrince::step_toward(double t_limit) {
  if (t_limit == t_) return t_;
  const double direction = t_limit > t_ ? 1.0 : -1.0;
  if (!have_k1_) {
    eval(t_, y_, k_[0]);
    have_k1_ = true;
  }
  if (h_ <= 0.0) h_ = initial_step(direction);

  std::size_t attempts = 0;
  while (true) {
    if (++attempts > options_.max_steps) {
      throw SolverError("step budget exhausted at " + describe(t_, y_), t_, y_);
    }
    const double remaining = std::abs(t_limit - t_);
    double h = h_;
    bool landing = false;
    if (h * 1.01 >= remaining) {
      h = remaining;
      landing = true;
    }
    const double dt = direction * h;

    for (std::size_t s = 1; s < 7; ++s) {
      for (std::size_t i = 0; i < dim_; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < s; ++j) acc += kA[s][j] * k_[j][i];
        tmp_[i] = y_[i] + dt * acc;
      }
      const double ts = (s == 6) ? (landing ? t_limit : t_ + dt) : t_ + kC[s] * dt;
      if (s == 6) {
        std::copy(tmp_.begin(), tmp_.end(), y_new_.begin());
      }
      eval(ts, tmp_, k_[s]);
    }
    for (std::size_t i = 0; i < dim_; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < 7; ++j) acc += kE[j] * k_[j][i];
      err_[i] = dt * acc;
    }
    const double err = error_norm();

    if (err <= 1.0) {
      double factor = options_.max_factor;
      if (err > 0.0) {
        factor = options_.safety * std::pow(err, -kExpo1) * std::pow(err_old_, kBeta);
        factor = std::clamp(factor, options_.min_factor, options_.max_factor);
      }
      err_old_ = std::max(err, 1e-4);
      const double h_next = h * factor;
      h_ = landing ? std::max(h_next, h_) : h_next;
      t_ = landing ? t_limit : t_ + dt;
      y_.swap(y_new_);
      k_[0].swap(k_[6]);
      ++stats_.accepted;
      return t_;
    }

    ++stats_.rejected;
    const double factor =
        std::max(options_.min_factor, options_.safety * std::pow(err, -kExpo1));
    h_ = h * std::min(1.0, factor);
    if (h_ < min_step_) {
      throw SolverError("step size underflow (stiff or singular dynamics) at " +
                            describe(t_, y_),
                        t_, y_);
    }
  }
}

void DormandPrince::advance_to(double t_target) {
  while (t_ != t_target) step_toward(t_target);
}

Trajectory integrate(const OdeProblem& problem) {
  const double direction = problem.t_end >= problem.t_start ? 1.0 : -1.0;
  const double lo = std::min(problem.t_start, problem.t_end);
  const double hi = std::max(problem.t_start, problem.t_end);
  double previous = problem.t_start;
  for (double t : problem.landing_times) {
    if (t < lo || t > hi) {
      throw std::invalid_argument("landing time outside the integration span");
    }
    if ((t - previous) * direction < 0.0) {
      throw std::invalid_argument("landing times must be sorted in integration direction");
    }
    previous = t;
  }

  SolverOptions options;
  options.rtol = problem.rtol;
  options.atol = problem.atol;
  DormandPrince solver(problem.initial_state.size(), problem.field, options);
  solver.reset(problem.t_start, problem.initial_state, hi - lo);

  Trajectory out;
  auto run_to = [&](double target) {
    while (solver.time() != target) {
      out.step_times.push_back(solver.step_toward(target));
    }
  };
  for (double t : problem.landing_times) {
    run_to(t);
    out.landing_times.push_back(t);
    out.landing_states.emplace_back(solver.state().begin(), solver.state().end());
  }
  run_to(problem.t_end);
  out.final_state.assign(solver.state().begin(), solver.state().end());
  out.stats = solver.stats();
  return out;
}

std::vector<double> step_dense(std::span<const double> state, double t, double dt,
                               const VectorField& field) {
  const std::size_t n = state.size();
  std::vector<std::vector<double>> k(7, std::vector<double>(n));
  std::vector<double> tmp(n);
  field(t, state, k[0]);
  for (std::size_t s = 1; s < 6; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < s; ++j) acc += kA[s][j] * k[j][i];
      tmp[i] = state[i] + dt * acc;
    }
    field(t + kC[s] * dt, tmp, k[s]);
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < 6; ++j) acc += kB[j] * k[j][i];
    out[i] = state[i] + dt * acc;
  }
  return out;
}

}  // namespace jumpflow
