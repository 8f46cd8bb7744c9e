#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "jumpflow/events.hpp"

namespace jumpflow {

/// lambda(t) = lambda0
struct Poisson {
  double lambda0 = 1.0;
};

/// lambda(t) = lambda0 + alpha * sum_{tau_j < t} exp(-beta (t - tau_j))
struct HawkesExp {
  double lambda0 = 0.2;
  double alpha = 0.8;
  double beta = 1.0;
};

/// lambda(t) = lambda0 + alpha * sum_{tau_j < t} kappa(t - tau_j) with the
/// delayed power-law kernel kappa(u) = 0 for u < sigma and
/// (beta / sigma) (u / sigma)^(-beta - 1) otherwise.
struct HawkesPL {
  double lambda0 = 0.2;
  double alpha = 0.8;
  double beta = 2.0;
  double sigma = 1.0;
};

/// lambda(t) = exp(mu t - beta N(t)), N(t) = #{tau_j < t}
struct SelfCorrecting {
  double mu = 0.5;
  double beta = 0.2;
};

using ClassicalProcessSpec = std::variant<Poisson, HawkesExp, HawkesPL, SelfCorrecting>;

enum class Family { poisson, hawkes_exp, hawkes_pl, self_correcting };

Family family_of(const ClassicalProcessSpec& spec);
std::string family_name(Family family);
/// Accepts "poisson", "hawkes_exp", "hawkes_pl", "self_correcting".
Family parse_family(const std::string& name);

/// Parameters in declaration order (e.g. lambda0, alpha, beta for HawkesExp).
std::vector<double> parameters(const ClassicalProcessSpec& spec);
std::vector<std::string> parameter_names(Family family);
ClassicalProcessSpec make_spec(Family family, std::span<const double> values);

/// Throws std::invalid_argument unless every parameter is positive and finite.
void validate(const ClassicalProcessSpec& spec);
/// Set for supercritical Hawkes processes (branching ratio >= 1).
std::optional<std::string> stationarity_warning(const ClassicalProcessSpec& spec);

/// Conditional intensity at t given the event times; only times strictly
/// before t contribute.
double true_intensity(const ClassicalProcessSpec& spec, double t,
                      std::span<const double> history);

/// Left-limit intensity at each of the sorted query times.
std::vector<double> true_intensity_trace(const ClassicalProcessSpec& spec,
                                         const EventSequence& seq,
                                         std::span<const double> times);

/// Exact sampling on [t0, t_end] by thinning; marks are type 0.
EventSequence simulate_classical(const ClassicalProcessSpec& spec, double t0, double t_end,
                                 std::uint64_t seed);

/// -sum log lambda(tau_j) + closed-form compensator over the sequence window.
double classical_nll(const ClassicalProcessSpec& spec, const EventSequence& seq);

/// NLL gradient with respect to parameters(spec).
std::vector<double> classical_nll_grad(const ClassicalProcessSpec& spec,
                                       const EventSequence& seq);

struct FitOptions {
  std::size_t max_iterations = 2000;
  double step = 1e-2;
  double tolerance = 1e-10;  // on the max-abs log-parameter gradient
};

struct FitResult {
  ClassicalProcessSpec spec;
  double nll = 0.0;  // summed over the dataset
  std::size_t iterations = 0;
  bool converged = false;
};

/// Maximum-likelihood fit on log-parameters: BFGS directions with Armijo
/// backtracking, falling back to steepest descent. Returns the best iterate
/// even when not converged.
FitResult fit_mle(Family family, std::span<const EventSequence> dataset,
                  const FitOptions& options = {});

}  // namespace jumpflow
