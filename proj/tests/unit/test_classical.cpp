#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "jumpflow/adjoint.hpp"
#include "jumpflow/classical.hpp"
#include "oracles.hpp"

namespace jumpflow {
namespace {

using testing::central_difference;
using testing::close;

EventSequence with_times(double t0, double t_end, std::vector<double> times) {
  EventSequence seq{t0, t_end, {}};
  for (double t : times) seq.events.push_back(Event{t, Mark{}});
  return seq;
}

// Direct evaluation of the intensity formulas, counting events with
// tau < t (or tau <= t when `inclusive`, for right limits).
double brute_intensity(const ClassicalProcessSpec& spec, double t, const EventSequence& seq,
                       bool inclusive) {
  auto before = [&](double tau) { return inclusive ? tau <= t : tau < t; };
  if (auto* p = std::get_if<Poisson>(&spec)) return p->lambda0;
  if (auto* h = std::get_if<HawkesExp>(&spec)) {
    double s = h->lambda0;
    for (const Event& e : seq.events) {
      if (before(e.time)) s += h->alpha * std::exp(-h->beta * (t - e.time));
    }
    return s;
  }
  if (auto* h = std::get_if<HawkesPL>(&spec)) {
    double s = h->lambda0;
    for (const Event& e : seq.events) {
      const double u = t - e.time;
      if (before(e.time) && u >= h->sigma) {
        s += h->alpha * (h->beta / h->sigma) * std::pow(u / h->sigma, -h->beta - 1.0);
      }
    }
    return s;
  }
  const auto& sc = std::get<SelfCorrecting>(spec);
  double count = 0.0;
  for (const Event& e : seq.events) count += before(e.time) ? 1.0 : 0.0;
  return std::exp(sc.mu * t - sc.beta * count);
}

// -sum log lambda + compensator by trapezoid on a fine grid with both
// intensity limits at events.
double quadrature_nll(const ClassicalProcessSpec& spec, const EventSequence& seq,
                      std::size_t points) {
  const CheckpointGrid grid = make_grid(seq, points);
  std::vector<double> left, right;
  for (const GridNode& n : grid.nodes) {
    left.push_back(brute_intensity(spec, n.time, seq, false));
    right.push_back(brute_intensity(spec, n.time, seq, true));
  }
  double nll = quadrature_compensator(grid, left, right);
  for (const Event& e : seq.events) nll -= std::log(brute_intensity(spec, e.time, seq, false));
  return nll;
}

std::vector<ClassicalProcessSpec> all_families() {
  return {Poisson{1.3}, HawkesExp{0.3, 0.7, 1.2}, HawkesPL{0.4, 0.6, 1.5, 0.7},
          SelfCorrecting{0.4, 0.3}};
}

TEST(ClassicalSpec, FamilyNamesRoundTrip) {
  for (Family f : {Family::poisson, Family::hawkes_exp, Family::hawkes_pl,
                   Family::self_correcting}) {
    EXPECT_EQ(parse_family(family_name(f)), f);
  }
  EXPECT_EQ(parse_family("hawkes-exp"), Family::hawkes_exp);
  EXPECT_THROW(parse_family("hawkes"), std::invalid_argument);
}

TEST(ClassicalSpec, ParametersRoundTrip) {
  for (const auto& spec : all_families()) {
    const Family f = family_of(spec);
    EXPECT_EQ(parameter_names(f).size(), parameters(spec).size());
    EXPECT_EQ(parameters(make_spec(f, parameters(spec))), parameters(spec));
  }
  EXPECT_EQ(parameters(HawkesExp{0.2, 0.8, 1.0}), (std::vector<double>{0.2, 0.8, 1.0}));
  EXPECT_THROW(make_spec(Family::poisson, std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST(ClassicalSpec, ValidationRejectsNonPositive) {
  EXPECT_NO_THROW(validate(HawkesExp{}));
  EXPECT_THROW(validate(Poisson{0.0}), std::invalid_argument);
  EXPECT_THROW(validate(HawkesExp{0.2, -0.1, 1.0}), std::invalid_argument);
  EXPECT_THROW(validate(HawkesPL{0.2, 0.5, 2.0, NAN}), std::invalid_argument);
  EXPECT_THROW(validate(SelfCorrecting{0.5, INFINITY}), std::invalid_argument);
}

TEST(ClassicalSpec, SupercriticalHawkesIsWarned) {
  EXPECT_FALSE(stationarity_warning(HawkesExp{0.2, 0.8, 1.0}));
  EXPECT_TRUE(stationarity_warning(HawkesExp{0.2, 1.0, 1.0}));
  EXPECT_TRUE(stationarity_warning(HawkesExp{0.2, 2.0, 1.0}));
  EXPECT_FALSE(stationarity_warning(Poisson{5.0}));
  EXPECT_FALSE(stationarity_warning(SelfCorrecting{}));
}

TEST(TrueIntensity, DocumentedValues) {
  EXPECT_EQ(true_intensity(Poisson{1.0}, 37.0, std::vector<double>{1.0, 2.0}), 1.0);
  EXPECT_NEAR(true_intensity(HawkesExp{0.2, 0.8, 1.0}, 1.0, std::vector<double>{0.0}),
              0.2 + 0.8 * std::exp(-1.0), 1e-15);
  EXPECT_NEAR(true_intensity(HawkesExp{0.2, 0.8, 1.0}, 1.0, std::vector<double>{0.0}), 0.49430,
              1e-5);
  EXPECT_EQ(true_intensity(HawkesPL{0.2, 0.8, 2.0, 1.0}, 1.5, std::vector<double>{0.6}), 0.2);
  EXPECT_NEAR(true_intensity(HawkesPL{0.2, 0.8, 2.0, 1.0}, 3.0, std::vector<double>{1.0}),
              0.2 + 0.8 * 2.0 * std::pow(2.0, -3.0), 1e-15);
  EXPECT_NEAR(true_intensity(SelfCorrecting{0.5, 0.2}, 2.0, std::vector<double>{1.0}), 2.22554,
              1e-5);
}

TEST(TrueIntensity, IsLeftContinuous) {
  const std::vector<double> history{1.0};
  // The event at t = 1 is not part of its own intensity.
  EXPECT_EQ(true_intensity(HawkesExp{0.2, 0.8, 1.0}, 1.0, history), 0.2);
  EXPECT_NEAR(true_intensity(SelfCorrecting{0.5, 0.2}, 1.0, history), std::exp(0.5), 1e-15);
}

TEST(TrueIntensity, TraceMatchesPointwiseEvaluation) {
  for (const auto& spec : all_families()) {
    const EventSequence seq = simulate_classical(spec, 0.0, 20.0, 3);
    std::vector<double> times;
    for (int i = 0; i <= 400; ++i) times.push_back(0.05 * i);
    for (const Event& e : seq.events) times.push_back(e.time);
    std::sort(times.begin(), times.end());
    const auto trace = true_intensity_trace(spec, seq, times);
    for (std::size_t i = 0; i < times.size(); ++i) {
      EXPECT_TRUE(close(trace[i], brute_intensity(spec, times[i], seq, false), 1e-12, 1e-12))
          << family_name(family_of(spec)) << " t=" << times[i];
    }
  }
}

TEST(ClassicalNll, PoissonClosedForm) {
  EXPECT_DOUBLE_EQ(classical_nll(Poisson{1.0}, with_times(0.0, 2.0, {0.5, 1.5})), 2.0);
  const EventSequence seq = with_times(0.0, 4.0, {0.5, 1.5, 3.0});
  EXPECT_NEAR(classical_nll(Poisson{2.0}, seq), -3.0 * std::log(2.0) + 8.0, 1e-14);
}

TEST(ClassicalNll, PoissonIsTranslationInvariant) {
  const EventSequence a = with_times(0.0, 4.0, {0.5, 1.5, 3.0});
  const EventSequence b = with_times(10.0, 14.0, {10.5, 11.5, 13.0});
  EXPECT_NEAR(classical_nll(Poisson{1.7}, a), classical_nll(Poisson{1.7}, b), 1e-13);
}

TEST(ClassicalNll, HawkesWithoutExcitationIsPoisson) {
  const EventSequence seq = simulate_classical(Poisson{0.8}, 0.0, 50.0, 4);
  EXPECT_DOUBLE_EQ(classical_nll(HawkesExp{0.8, 0.0, 1.3}, seq), classical_nll(Poisson{0.8}, seq));
}

TEST(ClassicalNll, ClosedFormMatchesQuadrature) {
  for (const auto& spec : all_families()) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const EventSequence seq = simulate_classical(spec, 0.0, 15.0, seed);
      EXPECT_NEAR(classical_nll(spec, seq), quadrature_nll(spec, seq, 200001), 1e-3)
          << family_name(family_of(spec)) << " seed " << seed;
    }
  }
}

TEST(ClassicalNll, GradientMatchesFiniteDifferences) {
  for (const auto& spec : all_families()) {
    const Family f = family_of(spec);
    const EventSequence seq = simulate_classical(spec, 0.0, 20.0, 8);
    const auto grad = classical_nll_grad(spec, seq);
    const auto theta = parameters(spec);
    const auto fd = central_difference(
        [&](std::span<const double> p) { return classical_nll(make_spec(f, p), seq); }, theta,
        1e-6);
    ASSERT_EQ(grad.size(), fd.size());
    for (std::size_t i = 0; i < fd.size(); ++i) {
      EXPECT_TRUE(close(grad[i], fd[i], 1e-6, 1e-6)) << family_name(f) << " param " << i;
    }
  }
}

TEST(ClassicalSimulation, DegenerateWindowIsEmpty) {
  for (const auto& spec : all_families()) {
    EXPECT_TRUE(simulate_classical(spec, 5.0, 5.0, 1).events.empty());
  }
}

TEST(ClassicalSimulation, PoissonMeanCount) {
  double total = 0.0;
  for (std::uint64_t s = 0; s < 500; ++s) {
    total += static_cast<double>(simulate_classical(Poisson{1.0}, 0.0, 100.0, s).events.size());
  }
  EXPECT_NEAR(total / 500.0, 100.0, 1.35);
}

}  // namespace
}  // namespace jumpflow
