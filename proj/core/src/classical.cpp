#include "jumpflow/classical.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "jumpflow/errors.hpp"

namespace jumpflow {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double pl_kernel(const HawkesPL& p, double u) {
  if (u < p.sigma) return 0.0;
  return (p.beta / p.sigma) * std::pow(u / p.sigma, -p.beta - 1.0);
}

// Largest value kappa(s - tau) can take for s >= t.
double pl_kernel_bound(const HawkesPL& p, double u) {
  return u < p.sigma ? p.beta / p.sigma : pl_kernel(p, u);
}

// Integral of the power-law kernel over [0, u].
double pl_kernel_integral(const HawkesPL& p, double u) {
  if (u < p.sigma) return 0.0;
  return 1.0 - std::pow(u / p.sigma, -p.beta);
}

// Number of history entries strictly before t.
std::size_t count_before(std::span<const double> history, double t) {
  return static_cast<std::size_t>(
      std::lower_bound(history.begin(), history.end(), t) - history.begin());
}

}  // namespace

Family family_of(const ClassicalProcessSpec& spec) {
  return static_cast<Family>(spec.index());
}

std::string family_name(Family family) {
  switch (family) {
    case Family::poisson: return "poisson";
    case Family::hawkes_exp: return "hawkes_exp";
    case Family::hawkes_pl: return "hawkes_pl";
    case Family::self_correcting: return "self_correcting";
  }
  return "unknown";
}

Family parse_family(const std::string& name) {
  if (name == "poisson") return Family::poisson;
  if (name == "hawkes_exp" || name == "hawkes-exp" || name == "hawkes-e") return Family::hawkes_exp;
  if (name == "hawkes_pl" || name == "hawkes-pl") return Family::hawkes_pl;
  if (name == "self_correcting" || name == "self-correcting") return Family::self_correcting;
  throw std::invalid_argument("unknown process family '" + name + "'");
}

std::vector<double> parameters(const ClassicalProcessSpec& spec) {
  return std::visit(
      overloaded{
          [](const Poisson& p) { return std::vector<double>{p.lambda0}; },
          [](const HawkesExp& p) { return std::vector<double>{p.lambda0, p.alpha, p.beta}; },
          [](const HawkesPL& p) {
            return std::vector<double>{p.lambda0, p.alpha, p.beta, p.sigma};
          },
          [](const SelfCorrecting& p) { return std::vector<double>{p.mu, p.beta}; },
      },
      spec);
}

std::vector<std::string> parameter_names(Family family) {
  switch (family) {
    case Family::poisson: return {"lambda0"};
    case Family::hawkes_exp: return {"lambda0", "alpha", "beta"};
    case Family::hawkes_pl: return {"lambda0", "alpha", "beta", "sigma"};
    case Family::self_correcting: return {"mu", "beta"};
  }
  return {};
}

ClassicalProcessSpec make_spec(Family family, std::span<const double> v) {
  if (v.size() != parameter_names(family).size()) {
    throw std::invalid_argument("wrong number of parameters for " + family_name(family));
  }
  switch (family) {
    case Family::poisson: return Poisson{v[0]};
    case Family::hawkes_exp: return HawkesExp{v[0], v[1], v[2]};
    case Family::hawkes_pl: return HawkesPL{v[0], v[1], v[2], v[3]};
    case Family::self_correcting: return SelfCorrecting{v[0], v[1]};
  }
  throw std::invalid_argument("unknown family");
}

void validate(const ClassicalProcessSpec& spec) {
  const auto names = parameter_names(family_of(spec));
  const auto values = parameters(spec);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0) || !std::isfinite(values[i])) {
      throw std::invalid_argument(family_name(family_of(spec)) + ": parameter " + names[i] +
                                  " must be positive and finite");
    }
  }
}

std::optional<std::string> stationarity_warning(const ClassicalProcessSpec& spec) {
  if (const auto* p = std::get_if<HawkesExp>(&spec); p && p->alpha / p->beta >= 1.0) {
    return "supercritical Hawkes process: alpha/beta = " + std::to_string(p->alpha / p->beta) +
           " >= 1, event counts grow without bound";
  }
  if (const auto* p = std::get_if<HawkesPL>(&spec); p && p->alpha >= 1.0) {
    return "supercritical Hawkes process: branching ratio alpha = " +
           std::to_string(p->alpha) + " >= 1";
  }
  return std::nullopt;
}

double true_intensity(const ClassicalProcessSpec& spec, double t,
                      std::span<const double> history) {
  return std::visit(
      overloaded{
          [&](const Poisson& p) { return p.lambda0; },
          [&](const HawkesExp& p) {
            double acc = 0.0;
            for (double tau : history) {
              if (tau < t) acc += std::exp(-p.beta * (t - tau));
            }
            return p.lambda0 + p.alpha * acc;
          },
          [&](const HawkesPL& p) {
            double acc = 0.0;
            for (double tau : history) {
              if (tau < t) acc += pl_kernel(p, t - tau);
            }
            return p.lambda0 + p.alpha * acc;
          },
          [&](const SelfCorrecting& p) {
            const auto before = std::count_if(history.begin(), history.end(),
                                              [&](double tau) { return tau < t; });
            return std::exp(p.mu * t - p.beta * static_cast<double>(before));
          },
      },
      spec);
}

std::vector<double> true_intensity_trace(const ClassicalProcessSpec& spec,
                                         const EventSequence& seq,
                                         std::span<const double> times) {
  const std::vector<double> history = seq.times();
  std::vector<double> out(times.size());
  if (const auto* p = std::get_if<HawkesExp>(&spec)) {
    // Running sum of exp(-beta (t - tau)) over past events.
    double acc = 0.0;
    double t_acc = times.empty() ? 0.0 : times.front();
    std::size_t j = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double t = times[i];
      acc *= std::exp(-p->beta * (t - t_acc));
      t_acc = t;
      while (j < history.size() && history[j] < t) {
        acc += std::exp(-p->beta * (t - history[j]));
        ++j;
      }
      out[i] = p->lambda0 + p->alpha * acc;
    }
    return out;
  }
  for (std::size_t i = 0; i < times.size(); ++i) {
    const std::size_t k = count_before(history, times[i]);
    out[i] = true_intensity(spec, times[i], std::span<const double>(history).first(k));
  }
  return out;
}

EventSequence simulate_classical(const ClassicalProcessSpec& spec, double t0, double t_end,
                                 std::uint64_t seed) {
  validate(spec);
  if (!(t0 <= t_end)) throw std::invalid_argument("simulation window is reversed");
  EventSequence seq;
  seq.t_start = t0;
  seq.t_end = t_end;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto draw_gap = [&](double rate) { return std::exponential_distribution<double>(rate)(rng); };
  auto guard = [](double lambda, double bound, double t) {
    if (lambda > bound * (1.0 + 1e-12)) {
      std::ostringstream os;
      os << "thinning majorant violated at t=" << t << ": " << lambda << " > " << bound;
      throw InvariantError(os.str());
    }
  };
  auto accept = [&](double t) { seq.events.push_back(Event{t, Mark{}}); };

  std::visit(
      overloaded{
          [&](const Poisson& p) {
            double t = t0;
            while (true) {
              t += draw_gap(p.lambda0);
              if (t > t_end) break;
              accept(t);
            }
          },
          [&](const HawkesExp& p) {
            // excite = sum exp(-beta (t - tau)) at the current time, events
            // included; the intensity is non-increasing until the next event.
            double t = t0;
            double excite = 0.0;
            while (true) {
              const double bound = p.lambda0 + p.alpha * excite;
              const double s = t + draw_gap(bound);
              if (s > t_end) break;
              excite *= std::exp(-p.beta * (s - t));
              t = s;
              const double lambda = p.lambda0 + p.alpha * excite;
              guard(lambda, bound, s);
              if (unif(rng) * bound <= lambda) {
                accept(s);
                excite += 1.0;
              }
            }
          },
          [&](const HawkesPL& p) {
            double t = t0;
            while (true) {
              double bound = p.lambda0;
              for (const Event& e : seq.events) bound += p.alpha * pl_kernel_bound(p, t - e.time);
              const double s = t + draw_gap(bound);
              if (s > t_end) break;
              t = s;
              double lambda = p.lambda0;
              for (const Event& e : seq.events) lambda += p.alpha * pl_kernel(p, s - e.time);
              guard(lambda, bound, s);
              if (unif(rng) * bound <= lambda) accept(s);
            }
          },
          [&](const SelfCorrecting& p) {
            // The intensity grows between events; refresh the majorant over
            // windows of length 1/mu.
            const double horizon = 1.0 / p.mu;
            double t = t0;
            while (t < t_end) {
              const double n = static_cast<double>(seq.events.size());
              const double edge = std::min(t + horizon, t_end);
              const double bound = std::exp(p.mu * edge - p.beta * n);
              const double s = t + draw_gap(bound);
              if (s > edge) {
                t = edge;
                continue;
              }
              t = s;
              const double lambda = std::exp(p.mu * s - p.beta * n);
              guard(lambda, bound, s);
              if (unif(rng) * bound <= lambda) accept(s);
            }
          },
      },
      spec);
  return seq;
}

double classical_nll(const ClassicalProcessSpec& spec, const EventSequence& seq) {
  const double T = seq.t_end - seq.t_start;
  const std::size_t J = seq.events.size();
  return std::visit(
      overloaded{
          [&](const Poisson& p) {
            // Accumulated like HawkesExp so that alpha = 0 reproduces it bitwise.
            double nll = p.lambda0 * T;
            for (std::size_t j = 0; j < J; ++j) nll -= std::log(p.lambda0);
            return nll;
          },
          [&](const HawkesExp& p) {
            double nll = p.lambda0 * T;
            double excite = 0.0;
            for (std::size_t j = 0; j < J; ++j) {
              if (j > 0) {
                excite = std::exp(-p.beta * (seq.events[j].time - seq.events[j - 1].time)) *
                         (1.0 + excite);
              }
              nll -= std::log(p.lambda0 + p.alpha * excite);
              nll += (p.alpha / p.beta) *
                     (1.0 - std::exp(-p.beta * (seq.t_end - seq.events[j].time)));
            }
            return nll;
          },
          [&](const HawkesPL& p) {
            double nll = p.lambda0 * T;
            for (std::size_t j = 0; j < J; ++j) {
              double acc = 0.0;
              for (std::size_t i = 0; i < j; ++i) {
                acc += pl_kernel(p, seq.events[j].time - seq.events[i].time);
              }
              nll -= std::log(p.lambda0 + p.alpha * acc);
              nll += p.alpha * pl_kernel_integral(p, seq.t_end - seq.events[j].time);
            }
            return nll;
          },
          [&](const SelfCorrecting& p) {
            double nll = 0.0;
            double left = seq.t_start;
            for (std::size_t k = 0; k <= J; ++k) {
              const double right = k < J ? seq.events[k].time : seq.t_end;
              const double n = static_cast<double>(k);
              nll += (std::exp(p.mu * right - p.beta * n) - std::exp(p.mu * left - p.beta * n)) /
                     p.mu;
              if (k < J) nll -= p.mu * right - p.beta * n;
              left = right;
            }
            return nll;
          },
      },
      spec);
}

std::vector<double> classical_nll_grad(const ClassicalProcessSpec& spec,
                                       const EventSequence& seq) {
  const double T = seq.t_end - seq.t_start;
  const std::size_t J = seq.events.size();
  return std::visit(
      overloaded{
          [&](const Poisson& p) {
            return std::vector<double>{-static_cast<double>(J) / p.lambda0 + T};
          },
          [&](const HawkesExp& p) {
            double g0 = T, ga = 0.0, gb = 0.0;
            double A = 0.0;  // sum_{i<j} e^{-beta (tau_j - tau_i)}
            double B = 0.0;  // dA/dbeta
            for (std::size_t j = 0; j < J; ++j) {
              if (j > 0) {
                const double dt = seq.events[j].time - seq.events[j - 1].time;
                const double decay = std::exp(-p.beta * dt);
                B = decay * (B - dt * (1.0 + A));
                A = decay * (1.0 + A);
              }
              const double lambda = p.lambda0 + p.alpha * A;
              g0 -= 1.0 / lambda;
              ga -= A / lambda;
              gb -= p.alpha * B / lambda;
              const double u = seq.t_end - seq.events[j].time;
              const double e = std::exp(-p.beta * u);
              ga += (1.0 - e) / p.beta;
              gb += p.alpha * (u * e / p.beta - (1.0 - e) / (p.beta * p.beta));
            }
            return std::vector<double>{g0, ga, gb};
          },
          [&](const HawkesPL& p) {
            double g0 = T, ga = 0.0, gb = 0.0, gs = 0.0;
            for (std::size_t j = 0; j < J; ++j) {
              double acc = 0.0, dacc_b = 0.0, dacc_s = 0.0;
              for (std::size_t i = 0; i < j; ++i) {
                const double u = seq.events[j].time - seq.events[i].time;
                const double k = pl_kernel(p, u);
                if (k == 0.0) continue;
                acc += k;
                dacc_b += k * (1.0 / p.beta - std::log(u / p.sigma));
                dacc_s += k * p.beta / p.sigma;
              }
              const double lambda = p.lambda0 + p.alpha * acc;
              g0 -= 1.0 / lambda;
              ga -= acc / lambda;
              gb -= p.alpha * dacc_b / lambda;
              gs -= p.alpha * dacc_s / lambda;
              const double U = seq.t_end - seq.events[j].time;
              if (U >= p.sigma) {
                const double r = std::pow(p.sigma / U, p.beta);
                ga += 1.0 - r;
                gb += p.alpha * r * std::log(U / p.sigma);
                gs -= p.alpha * (p.beta / p.sigma) * r;
              }
            }
            return std::vector<double>{g0, ga, gb, gs};
          },
          [&](const SelfCorrecting& p) {
            double gm = 0.0, gb = 0.0;
            double left = seq.t_start;
            for (std::size_t k = 0; k <= J; ++k) {
              const double right = k < J ? seq.events[k].time : seq.t_end;
              const double n = static_cast<double>(k);
              const double er = std::exp(p.mu * right - p.beta * n);
              const double el = std::exp(p.mu * left - p.beta * n);
              gm += (right * er - left * el) / p.mu - (er - el) / (p.mu * p.mu);
              gb += -n * (er - el) / p.mu;
              if (k < J) {
                gm -= right;
                gb += n;
              }
              left = right;
            }
            return std::vector<double>{gm, gb};
          },
      },
      spec);
}

}  // namespace jumpflow
