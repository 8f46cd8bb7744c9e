#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "jumpflow/adjoint.hpp"
#include "jumpflow/classical.hpp"
#include "jumpflow/mlp.hpp"
#include "jumpflow/model.hpp"
#include "jumpflow/ode.hpp"

namespace {

using namespace jumpflow;

void BM_MlpForward(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  const Mlp net({width, 20, width});
  std::vector<double> params(net.param_count());
  std::mt19937_64 rng(1);
  net.init_uniform(params, rng);
  std::vector<double> x(width, 0.3);
  Mlp::Tape tape;
  for (auto _ : state) {
    net.forward(params, x, tape);
    benchmark::DoNotOptimize(tape.output().data());
  }
}
BENCHMARK(BM_MlpForward)->Arg(5)->Arg(20);

void BM_MlpVjp(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  const Mlp net({width, 20, width});
  std::vector<double> params(net.param_count());
  std::mt19937_64 rng(1);
  net.init_uniform(params, rng);
  std::vector<double> x(width, 0.3), v(width, 1.0), dx(width), dp(net.param_count());
  Mlp::Tape tape;
  net.forward(params, x, tape);
  for (auto _ : state) {
    net.vjp(params, tape, v, dx, dp);
    benchmark::DoNotOptimize(dp.data());
  }
}
BENCHMARK(BM_MlpVjp)->Arg(5)->Arg(20);

void BM_DormandPrinceDecay(benchmark::State& state) {
  OdeProblem problem;
  problem.field = [](double, std::span<const double> z, std::span<double> dz) {
    for (std::size_t i = 0; i < z.size(); ++i) dz[i] = -z[i];
  };
  problem.initial_state.assign(8, 1.0);
  problem.t_end = 10.0;
  for (auto _ : state) benchmark::DoNotOptimize(integrate(problem).final_state.data());
}
BENCHMARK(BM_DormandPrinceDecay);

struct Fixture {
  LatentModel model{ModelConfig{}};
  ParamVector params = model.init_params(7);
  EventSequence seq = simulate_classical(HawkesExp{}, 0.0, 100.0, 11);
  CheckpointGrid grid = make_grid(seq, 200);
};

void BM_ForwardLoss(benchmark::State& state) {
  Fixture f;
  AdjointOptions options;
  options.compensator = static_cast<Compensator>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward_loss(f.model, f.params.values(), f.seq, f.grid, options));
  }
  state.counters["events"] = static_cast<double>(f.seq.events.size());
}
BENCHMARK(BM_ForwardLoss)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_BackwardGrads(benchmark::State& state) {
  Fixture f;
  AdjointOptions options;
  options.compensator = static_cast<Compensator>(state.range(0));
  const ForwardResult fwd = forward_loss(f.model, f.params.values(), f.seq, f.grid, options);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        backward_grads(f.model, f.params.values(), f.seq, f.grid, fwd.record, options));
  }
}
BENCHMARK(BM_BackwardGrads)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
