#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "jumpflow/classical.hpp"

namespace jumpflow {
namespace {

constexpr double kLogBound = 20.0;

struct Objective {
  Family family;
  std::span<const EventSequence> data;
  double scale;  // 1 / total events

  // Per-event NLL at log-parameters u; fills the gradient in u.
  double operator()(std::span<const double> u, std::vector<double>& grad) const {
    std::vector<double> theta(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) theta[i] = std::exp(u[i]);
    const ClassicalProcessSpec spec = make_spec(family, theta);
    grad.assign(u.size(), 0.0);
    double value = 0.0;
    for (const EventSequence& seq : data) {
      value += classical_nll(spec, seq);
      const auto g = classical_nll_grad(spec, seq);
      for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
    }
    for (std::size_t i = 0; i < u.size(); ++i) grad[i] *= theta[i] * scale;
    return value * scale;
  }
};

std::vector<double> initial_guess(Family family, double rate) {
  switch (family) {
    case Family::poisson: return {rate};
    case Family::hawkes_exp: return {0.5 * rate, 0.5, 1.0};
    case Family::hawkes_pl: return {0.5 * rate, 0.5, 2.0, 1.0};
    case Family::self_correcting: return {0.5, 0.5};
  }
  return {};
}

using Matrix = std::vector<std::vector<double>>;

Matrix identity(std::size_t n) {
  Matrix m(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) m[i][i] = 1.0;
  return m;
}

bool is_identity(const Matrix& m) { return m == identity(m.size()); }

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// H <- (I - r s y^T) H (I - r y s^T) + r s s^T with r = 1 / (y.s); skipped
// unless the curvature condition holds.
void bfgs_update(Matrix& h, const std::vector<double>& s, const std::vector<double>& y) {
  const double ys = dot(y, s);
  if (!(ys > 1e-12 * std::sqrt(dot(y, y) * dot(s, s)))) return;
  const std::size_t n = s.size();
  const double r = 1.0 / ys;
  std::vector<double> hy(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) hy[i] += h[i][k] * y[k];
  }
  const double yhy = dot(y, hy);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      h[i][k] += (1.0 + r * yhy) * r * s[i] * s[k] - r * (hy[i] * s[k] + s[i] * hy[k]);
    }
  }
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

FitResult fit_mle(Family family, std::span<const EventSequence> dataset,
                  const FitOptions& options) {
  std::size_t events = 0;
  double length = 0.0;
  for (const EventSequence& seq : dataset) {
    events += seq.events.size();
    length += seq.t_end - seq.t_start;
  }
  if (events == 0) throw std::invalid_argument("fit_mle needs at least one event");
  const double rate = static_cast<double>(events) / std::max(length, 1e-300);

  const Objective objective{family, dataset, 1.0 / static_cast<double>(events)};
  std::vector<double> u;
  for (double v : initial_guess(family, rate)) u.push_back(std::log(v));

  const std::size_t n = u.size();
  std::vector<double> grad, trial_grad, trial(n), direction(n);
  double value = objective(u, grad);
  double step = options.step;
  // Inverse Hessian estimate. Self-correcting and Hawkes likelihoods have
  // strongly correlated parameters, along which steepest descent crawls.
  Matrix inverse = identity(n);
  FitResult result;
  std::size_t it = 0;
  for (; it < options.max_iterations; ++it) {
    if (max_abs(grad) <= options.tolerance) {
      result.converged = true;
      break;
    }
    for (std::size_t i = 0; i < n; ++i) {
      direction[i] = 0.0;
      for (std::size_t k = 0; k < n; ++k) direction[i] -= inverse[i][k] * grad[k];
    }
    if (dot(direction, grad) >= 0.0) {
      inverse = identity(n);
      for (std::size_t i = 0; i < n; ++i) direction[i] = -grad[i];
    }
    // Backtracking on the Armijo condition, starting from the full quasi-
    // Newton step (or from the adaptive step while the estimate is the
    // identity).
    const bool newton = it > 0 && !is_identity(inverse);
    double scale = newton ? 1.0 : step;
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      double decrease = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        trial[i] = std::clamp(u[i] + scale * direction[i], -kLogBound, kLogBound);
        decrease += grad[i] * (u[i] - trial[i]);
      }
      double trial_value = std::numeric_limits<double>::infinity();
      try {
        trial_value = objective(trial, trial_grad);
      } catch (const std::exception&) {
      }
      if (std::isfinite(trial_value) && trial_value <= value - 1e-4 * decrease) {
        std::vector<double> s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
          s[i] = trial[i] - u[i];
          y[i] = trial_grad[i] - grad[i];
        }
        bfgs_update(inverse, s, y);
        u = trial;
        grad = trial_grad;
        value = trial_value;
        if (!newton) step = 2.0 * scale;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) {
      // No descent possible at machine precision: a stationary point.
      result.converged = max_abs(grad) <= std::sqrt(options.tolerance);
      break;
    }
  }

  std::vector<double> theta(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) theta[i] = std::exp(u[i]);
  result.spec = make_spec(family, theta);
  result.nll = value * static_cast<double>(events);
  result.iterations = it;
  return result;
}

}  // namespace jumpflow
