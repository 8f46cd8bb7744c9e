// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
// `--only N` runs a single one (ctest registers them separately).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jumpflow/adjoint.hpp"
#include "jumpflow/classical.hpp"
#include "jumpflow/config.hpp"
#include "jumpflow/metrics.hpp"
#include "jumpflow/model.hpp"
#include "jumpflow/ode.hpp"
#include "jumpflow/synthetic.hpp"
#include "jumpflow/trainer.hpp"
#include "oracles.hpp"

namespace {

using namespace jumpflow;
using testing::central_difference;
using testing::close;

// Tolerances, pinned.
constexpr std::size_t kGradientModels = 24;
constexpr double kGradientRel = 1e-3;
constexpr double kGradientAbs = 1e-6;
constexpr double kGradientSeconds = 300.0;
constexpr double kPoissonMape = 5.0;
constexpr double kPoissonSeconds = 1800.0;
constexpr double kHawkesMape = 25.0;
constexpr double kSelfCorrectingMape = 30.0;
constexpr double kPoissonFitRel = 1e-6;
constexpr double kHawkesFitRel = 0.10;
constexpr std::size_t kKsSamples = 10'000;
constexpr double kMeanCountRel = 0.05;
constexpr double kMarkRatio = 0.5;
constexpr double kSolverOrder = 5.0;
constexpr double kSolverOrderBand = 0.5;

constexpr std::size_t kSequences = 100;
constexpr double kWindow = 100.0;

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

RunConfig config_file(const char* name) {
  return load_config(std::string(JUMPFLOW_CONFIG_DIR) + "/" + name);
}

std::vector<EventSequence> pick(const std::vector<EventSequence>& all,
                                const std::vector<std::size_t>& idx) {
  std::vector<EventSequence> out;
  for (std::size_t i : idx) out.push_back(all[i]);
  return out;
}

struct Trained {
  ModelConfig model_config;
  TrainResult result;
  std::vector<EventSequence> test;
  double seconds = 0.0;
};

Trained train_on(const RunConfig& config, const MarkSpace& marks,
                 const std::vector<EventSequence>& corpus) {
  const auto start = Clock::now();
  Trained out;
  out.model_config = config.model;
  out.model_config.marks = marks;
  const LatentModel model(out.model_config);
  AdjointOptions options;
  options.forward = config.solver;
  options.backward = config.solver;
  out.result = train(model, config.train, corpus, options);
  out.test = pick(corpus, out.result.split.test);
  out.seconds = seconds_since(start);
  return out;
}

// ---------------------------------------------------------------------------
// 1 and 2: adjoint gradients against central differences.

struct GradientCase {
  ModelConfig config;
  EventSequence seq;
  AdjointOptions options;
  std::uint64_t seed;
};

std::vector<GradientCase> gradient_cases() {
  const MarkSpace spaces[] = {MarkSpace::discrete(1), MarkSpace::discrete(3),
                              MarkSpace::continuous(2, 2)};
  std::vector<GradientCase> cases;
  for (std::size_t i = 0; i < kGradientModels; ++i) {
    GradientCase c;
    c.config.n1 = 3;
    c.config.n2 = 2;
    c.config.marks = spaces[i % 3];
    c.config.flow_hidden = c.config.decay_hidden = c.config.jump_hidden =
        c.config.intensity_hidden = {8};
    c.seed = 1000 + i;
    c.seq = testing::random_sequence(10, 0.0, 10.0, c.config.marks, 5000 + i);
    c.options = testing::tight_adjoint();
    c.options.compensator = (i / 3) % 2 == 0 ? Compensator::quadrature : Compensator::exact;
    cases.push_back(std::move(c));
  }
  return cases;
}

constexpr std::size_t kGradientCheckpoints = 20;

// Number of coordinates of dL/dtheta (which contains dL/dz(t0)) outside the
// tolerance, with the adjoint run under `lift`.
struct Mismatch {
  std::size_t theta = 0;
  std::size_t z0 = 0;
  std::size_t total() const { return theta + z0; }
};

Mismatch gradient_mismatch(const GradientCase& c, LiftMode lift,
                           const std::vector<double>& fd) {
  const LatentModel model(c.config);
  const ParamVector params = model.init_params(c.seed);
  AdjointOptions options = c.options;
  options.lift = lift;
  const auto [loss, grads] =
      loss_and_gradients(model, params.values(), c.seq, kGradientCheckpoints, options);
  const std::size_t z0 = model.initial_state_offset();
  Mismatch m;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    const bool in_z0 = i >= z0 && i < z0 + model.state_dim();
    const double g = in_z0 ? grads.dz0[i - z0] : grads.dtheta[i];
    if (!close(g, fd[i], kGradientRel, kGradientAbs)) ++(in_z0 ? m.z0 : m.theta);
  }
  return m;
}

std::vector<double> finite_difference(const GradientCase& c) {
  const LatentModel model(c.config);
  const ParamVector params = model.init_params(c.seed);
  return central_difference(testing::loss_function(model, c.seq, kGradientCheckpoints, c.options),
                            params.values(), 1e-5);
}

Verdict criterion_1() {
  const auto start = Clock::now();
  std::size_t failing = 0, coordinates = 0;
  for (const GradientCase& c : gradient_cases()) {
    const auto fd = finite_difference(c);
    coordinates += fd.size();
    if (gradient_mismatch(c, LiftMode::exact, fd).total() > 0) ++failing;
  }
  const double elapsed = seconds_since(start);
  return {failing == 0 && elapsed < kGradientSeconds,
          format("%zu/%zu models match central differences (%zu coordinates), %.1f s",
                 kGradientModels - failing, kGradientModels, coordinates, elapsed)};
}

Verdict criterion_2() {
  std::size_t broken = 0, misordered_broken = 0;
  for (const GradientCase& c : gradient_cases()) {
    const auto fd = finite_difference(c);
    if (gradient_mismatch(c, LiftMode::disabled, fd).total() > 0) ++broken;
    if (gradient_mismatch(c, LiftMode::misordered, fd).total() > 0) ++misordered_broken;
  }
  return {broken == kGradientModels,
          format("lift disabled breaks %zu/%zu models (misordered lift breaks %zu)", broken,
                 kGradientModels, misordered_broken)};
}

// ---------------------------------------------------------------------------
// 3 to 5: intensity recovery on classical processes.

Verdict recovery(const ClassicalProcessSpec& truth, std::uint64_t seed, double tolerance,
                 double max_seconds, bool against_poisson) {
  const RunConfig config = config_file("acceptance.toml");
  const auto corpus = generate_corpus(truth, kSequences, 0.0, kWindow, seed);
  const Trained run = train_on(config, MarkSpace::discrete(1), corpus);
  const LatentModel model(run.model_config);
  const double mape = eval_intensity_mape(model, run.result.best_params.values(), truth, run.test,
                                          config.eval_grid_points, config.solver);
  bool pass = mape <= tolerance && run.seconds <= max_seconds;
  std::string detail = format("test MAPE %.2f%% (limit %.0f%%), %zu epochs, %.0f s", mape,
                              tolerance, run.result.logs.size(), run.seconds);
  if (against_poisson) {
    const auto train_set = pick(corpus, run.result.split.train);
    const FitResult poisson = fit_mle(Family::poisson, train_set);
    const double baseline =
        classical_intensity_mape(poisson.spec, truth, run.test, config.eval_grid_points);
    pass = pass && mape < baseline;
    detail += format(", best-fit Poisson MAPE %.2f%%", baseline);
  }
  return {pass, detail};
}

constexpr double kNoLimit = 1e300;

Verdict criterion_3() { return recovery(Poisson{1.0}, 301, kPoissonMape, kPoissonSeconds, false); }
Verdict criterion_4() {
  return recovery(HawkesExp{0.2, 0.8, 1.0}, 401, kHawkesMape, kNoLimit, true);
}
Verdict criterion_5() {
  return recovery(SelfCorrecting{0.5, 0.2}, 501, kSelfCorrectingMape, kNoLimit, false);
}

// ---------------------------------------------------------------------------
// 6 and 7: classical fitting and simulation.

Verdict criterion_6() {
  const auto poisson_data = generate_corpus(Poisson{1.0}, kSequences, 0.0, kWindow, 601);
  std::size_t events = 0;
  for (const auto& s : poisson_data) events += s.events.size();
  const double closed_form = static_cast<double>(events) / (kSequences * kWindow);
  const double fitted = std::get<Poisson>(fit_mle(Family::poisson, poisson_data).spec).lambda0;
  const double poisson_rel = std::abs(fitted - closed_form) / closed_form;

  const HawkesExp truth{0.2, 0.8, 1.0};
  const auto hawkes_data = generate_corpus(truth, 500, 0.0, kWindow, 602);
  const auto fit = fit_mle(Family::hawkes_exp, hawkes_data);
  const auto got = parameters(fit.spec);
  const auto want = parameters(truth);
  double worst = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i) {
    worst = std::max(worst, std::abs(got[i] - want[i]) / want[i]);
  }
  return {poisson_rel <= kPoissonFitRel && worst <= kHawkesFitRel,
          format("Poisson rate off closed form by %.1e (rel); Hawkes-E (%.3f, %.3f, %.3f), worst "
                 "relative error %.1f%%",
                 poisson_rel, got[0], got[1], got[2], 100.0 * worst)};
}

Verdict criterion_7() {
  // Gaps from a single long Poisson path, the first measured from t0.
  const double rate = 1.0;
  const auto seq = simulate_classical(Poisson{rate}, 0.0, 2.0 * kKsSamples, 701);
  std::vector<double> gaps;
  double last = seq.t_start;
  for (const Event& e : seq.events) {
    if (gaps.size() == kKsSamples) break;
    gaps.push_back(e.time - last);
    last = e.time;
  }
  const double d =
      testing::ks_statistic(gaps, [rate](double x) { return 1.0 - std::exp(-rate * x); });
  const double critical = testing::ks_critical_1pct(gaps.size());

  const HawkesExp h{0.2, 0.8, 1.0};
  const std::size_t runs = 20'000;
  const auto corpus = generate_corpus(h, runs, 0.0, kWindow, 702);
  double count = 0.0;
  for (const auto& s : corpus) count += static_cast<double>(s.events.size());
  count /= static_cast<double>(runs);
  const double stationary = h.lambda0 * kWindow / (1.0 - h.alpha / h.beta);
  const double rel = std::abs(count - stationary) / stationary;
  return {gaps.size() == kKsSamples && d < critical && rel <= kMeanCountRel,
          format("KS D = %.4f (1%% critical %.4f, n = %zu); Hawkes-E mean count %.2f vs %.1f "
                 "(%.1f%% off)",
                 d, critical, gaps.size(), count, stationary, 100.0 * rel)};
}

// ---------------------------------------------------------------------------
// 8: real-valued marks.

Verdict criterion_8() {
  const RunConfig config = config_file("acceptance_marks.toml");
  auto corpus = generate_corpus(HawkesExp{0.2, 0.8, 1.0}, kSequences, 0.0, kWindow, 801);
  for (auto& s : corpus) s = with_interval_features(s);
  const Trained run =
      train_on(config, MarkSpace::continuous(1, config.model.marks.components), corpus);
  const LatentModel model(run.model_config);
  const double mae = eval_mark_mae(model, run.result.best_params.values(), run.test, config.solver);
  const double baseline = running_mean_mark_mae(run.test);
  return {mae < kMarkRatio * baseline,
          format("test MAE %.3f vs running-mean MAE %.3f (ratio %.2f, limit %.1f), %.0f s", mae,
                 baseline, mae / baseline, kMarkRatio, run.seconds)};
}

// ---------------------------------------------------------------------------
// 9: order of the Dormand-Prince step.

Verdict criterion_9() {
  const VectorField decay = [](double, std::span<const double> z, std::span<double> dz) {
    dz[0] = -z[0];
  };
  const double horizon = 2.0;
  std::vector<double> log_h, log_err;
  for (std::size_t steps : {8, 16, 32, 64, 128}) {
    const double h = horizon / static_cast<double>(steps);
    std::vector<double> z{1.0};
    for (std::size_t i = 0; i < steps; ++i) z = step_dense(z, h * static_cast<double>(i), h, decay);
    log_h.push_back(std::log(h));
    log_err.push_back(std::log(std::abs(z[0] - std::exp(-horizon))));
  }
  // Least-squares slope of log error against log step. Coarser steps are
  // still pre-asymptotic, finer ones approach roundoff.
  const double n = static_cast<double>(log_h.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < log_h.size(); ++i) {
    sx += log_h[i];
    sy += log_err[i];
    sxx += log_h[i] * log_h[i];
    sxy += log_h[i] * log_err[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {std::abs(slope - kSolverOrder) <= kSolverOrderBand,
          format("convergence slope %.3f (want %.1f +- %.1f)", slope, kSolverOrder,
                 kSolverOrderBand)};
}

// ---------------------------------------------------------------------------
// 10: discrete marks end to end.

Verdict criterion_10() {
  const RunConfig config = config_file("acceptance_types.toml");
  const StickyTypes sticky{22, 0.8};
  auto corpus = generate_corpus(HawkesExp{0.2, 0.8, 1.0}, kSequences, 0.0, kWindow, 1001);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    corpus[i] = with_sticky_types(corpus[i], sticky, sequence_seed(1002, i));
  }
  const Trained run = train_on(config, MarkSpace::discrete(sticky.types), corpus);
  const LatentModel model(run.model_config);
  const double error =
      eval_type_error(model, run.result.best_params.values(), run.test, config.solver);
  const double baseline = majority_type_error(run.test);
  return {error < baseline, format("test type error %.1f%% vs majority class %.1f%%, %.0f s",
                                   error, baseline, run.seconds)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  app.add_option("--only", only, "run a single criterion")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"adjoint gradients vs finite differences", criterion_1},
      {"disabled adjoint lift is detected", criterion_2},
      {"Poisson intensity recovery", criterion_3},
      {"Hawkes-E intensity recovery", criterion_4},
      {"self-correcting intensity recovery", criterion_5},
      {"classical MLE self-consistency", criterion_6},
      {"thinning statistics", criterion_7},
      {"real-valued mark prediction", criterion_8},
      {"Dormand-Prince order", criterion_9},
      {"22-type discrete marks", criterion_10},
  };

  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && static_cast<std::size_t>(only) != i + 1) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    std::printf("criterion %2zu %s: %s: %s\n", i + 1, v.pass ? "PASS" : "FAIL",
                criteria[i].first, v.detail.c_str());
    std::fflush(stdout);
    all = all && v.pass;
  }
  return all ? 0 : 1;
}
