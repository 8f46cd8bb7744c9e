#include <gtest/gtest.h>

#include "jumpflow/adjoint.hpp"
#include "jumpflow/errors.hpp"
#include "oracles.hpp"

namespace jumpflow {
namespace {

using testing::central_difference;
using testing::close;
using testing::loss_function;
using testing::random_sequence;
using testing::tight_adjoint;

ModelConfig small_config(MarkSpace marks) {
  ModelConfig c;
  c.n1 = 3;
  c.n2 = 2;
  c.marks = marks;
  c.flow_hidden = c.decay_hidden = c.jump_hidden = c.intensity_hidden = {8};
  return c;
}

// Re-derives the half-segment trapezoid weights after node times were moved.
void reweigh(CheckpointGrid& grid) {
  for (auto& node : grid.nodes) node.weight_left = node.weight_right = 0.0;
  for (std::size_t k = 0; k + 1 < grid.nodes.size(); ++k) {
    const double half = 0.5 * (grid.nodes[k + 1].time - grid.nodes[k].time);
    grid.nodes[k].weight_right += half;
    grid.nodes[k + 1].weight_left += half;
  }
}

std::size_t mismatches(const std::vector<double>& adjoint, const std::vector<double>& fd) {
  std::size_t bad = 0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    if (!close(adjoint[i], fd[i], 1e-3, 1e-6)) ++bad;
  }
  return bad;
}

struct Case {
  MarkSpace marks;
  std::uint64_t seed;
  Compensator compensator = Compensator::quadrature;
};

AdjointOptions options_for(Compensator compensator, LiftMode lift = LiftMode::exact) {
  AdjointOptions o = tight_adjoint(lift);
  o.compensator = compensator;
  return o;
}

class AdjointFiniteDifference : public ::testing::TestWithParam<Case> {};

TEST_P(AdjointFiniteDifference, ParameterGradientMatches) {
  const Case c = GetParam();
  const LatentModel model(small_config(c.marks));
  const ParamVector params = model.init_params(c.seed);
  const EventSequence seq = random_sequence(10, 0.0, 10.0, c.marks, c.seed + 100);
  const auto options = options_for(c.compensator);

  const auto [loss, grads] = loss_and_gradients(model, params.values(), seq, 20, options);
  const auto fd = central_difference(loss_function(model, seq, 20, options), params.values(), 1e-5);
  ASSERT_EQ(grads.dtheta.size(), fd.size());
  for (std::size_t i = 0; i < fd.size(); ++i) {
    EXPECT_TRUE(close(grads.dtheta[i], fd[i], 1e-3, 1e-6))
        << "coordinate " << i << ": adjoint " << grads.dtheta[i] << " vs fd " << fd[i];
  }
  const auto init = params.segment("initial_state");
  for (std::size_t k = 0; k < grads.dz0.size(); ++k) {
    EXPECT_DOUBLE_EQ(grads.dz0[k], grads.dtheta[init.offset + k]);
  }
  EXPECT_LT(grads.max_recompute_error, 1e-6);
}

INSTANTIATE_TEST_SUITE_P(Marks, AdjointFiniteDifference,
                         ::testing::Values(Case{MarkSpace::discrete(1), 1},
                                           Case{MarkSpace::discrete(3), 2},
                                           Case{MarkSpace::continuous(2, 2), 3},
                                           Case{MarkSpace::discrete(1), 4, Compensator::exact},
                                           Case{MarkSpace::discrete(3), 5, Compensator::exact},
                                           Case{MarkSpace::continuous(2, 2), 6,
                                                Compensator::exact}));

TEST(ExactCompensator, ConstantIntensityIntegratesExactly) {
  ModelConfig config = small_config(MarkSpace::discrete(1));
  const LatentModel model(config);
  ParamVector params = model.init_params(3);
  testing::rig_intensity(model, params, {std::log(std::exp(1.5) - 1.0)});
  const EventSequence seq = random_sequence(4, 0.0, 3.0, config.marks, 4);
  const auto fwd = forward_loss(model, params.values(), seq, make_grid(seq, 5),
                                options_for(Compensator::exact));
  EXPECT_NEAR(fwd.loss.compensator, 4.5, 1e-12);
}

TEST(ExactCompensator, AgreesWithAFineTrapezoid) {
  const MarkSpace marks = MarkSpace::discrete(2);
  const LatentModel model(small_config(marks));
  const ParamVector params = model.init_params(8);
  const EventSequence seq = random_sequence(8, 0.0, 8.0, marks, 9);
  const double exact = forward_loss(model, params.values(), seq, make_grid(seq, 5),
                                    options_for(Compensator::exact))
                           .loss.compensator;
  const double fine = forward_loss(model, params.values(), seq, make_grid(seq, 20001),
                                   options_for(Compensator::quadrature))
                          .loss.compensator;
  EXPECT_NEAR(exact, fine, 1e-6 * std::abs(exact));
}

TEST(ExactCompensator, DisabledLiftStillDetected) {
  const MarkSpace marks = MarkSpace::discrete(1);
  const LatentModel model(small_config(marks));
  const ParamVector params = model.init_params(11);
  const EventSequence seq = random_sequence(10, 0.0, 10.0, marks, 12);
  const auto fd = central_difference(
      loss_function(model, seq, 20, options_for(Compensator::exact)), params.values(), 1e-5);
  const auto grads = loss_and_gradients(model, params.values(), seq, 20,
                                        options_for(Compensator::exact, LiftMode::disabled))
                         .second;
  EXPECT_GT(mismatches(grads.dtheta, fd), 0u);
}

TEST(AdjointLift, LinearJumpLiftsByIdentityPlusJacobian) {
  // With no hidden layer the jump is w(z) = W [c; k] + b, so dw/dz is the
  // constant matrix A whose h rows hold the c columns of W.
  ModelConfig config = small_config(MarkSpace::discrete(2));
  config.jump_hidden = {};
  const LatentModel model(config);
  ParamVector params = model.init_params(5);
  const auto W = params.view("jump").subspan(model.jump_net().weight_offset(0));
  const std::size_t n1 = config.n1, n2 = config.n2, in = n1 + 2;
  const std::vector<double> left{0.3, -0.2, 0.5, 1.1, -0.4};
  const std::vector<double> a0{0.7, -1.3, 0.2, 0.9, -0.6};

  std::vector<double> expected = a0;  // a (I + A)
  for (std::size_t col = 0; col < n1; ++col) {
    for (std::size_t r = 0; r < n2; ++r) expected[col] += a0[n1 + r] * W[r * in + col];
  }
  std::vector<double> a = a0;
  LatentModel::Workspace ws;
  lift_adjoint(model, params.values(), left, Mark{1, {}}, a, {}, ws);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], expected[k], 1e-14);
}

TEST(AdjointLift, ZeroJumpNetworkLeavesAdjointContinuous) {
  const LatentModel model(small_config(MarkSpace::discrete(1)));
  ParamVector params = model.init_params(5);
  for (double& v : params.view("jump")) v = 0.0;
  const std::vector<double> left{0.3, -0.2, 0.5, 1.1, -0.4};
  std::vector<double> a{0.7, -1.3, 0.2, 0.9, -0.6};
  const auto before = a;
  LatentModel::Workspace ws;
  lift_adjoint(model, params.values(), left, Mark{}, a, {}, ws);
  EXPECT_EQ(a, before);
}

TEST(Adjoint, EmptySequenceGradientMatches) {
  const LatentModel model(small_config(MarkSpace::discrete(1)));
  const ParamVector params = model.init_params(7);
  const EventSequence seq{0.0, 5.0, {}};
  const auto options = tight_adjoint();
  const auto [loss, grads] = loss_and_gradients(model, params.values(), seq, 10, options);
  const auto fd = central_difference(loss_function(model, seq, 10, options), params.values(), 1e-5);
  EXPECT_EQ(mismatches(grads.dtheta, fd), 0u);
  EXPECT_EQ(loss.intensity_term, 0.0);
}

TEST(Adjoint, DisabledAndMisorderedLiftsDisagreeWithFiniteDifferences) {
  const MarkSpace marks = MarkSpace::discrete(1);
  const LatentModel model(small_config(marks));
  const ParamVector params = model.init_params(11);
  const EventSequence seq = random_sequence(10, 0.0, 10.0, marks, 12);
  const auto fd = central_difference(loss_function(model, seq, 20, tight_adjoint()),
                                     params.values(), 1e-5);
  for (LiftMode mode : {LiftMode::disabled, LiftMode::misordered}) {
    const auto grads = loss_and_gradients(model, params.values(), seq, 20, tight_adjoint(mode)).second;
    EXPECT_GT(mismatches(grads.dtheta, fd), 0u) << "lift mode " << static_cast<int>(mode);
  }
}

class TimeDiagnostics : public ::testing::TestWithParam<Compensator> {};

TEST_P(TimeDiagnostics, MatchFiniteDifferences) {
  const MarkSpace marks = MarkSpace::discrete(2);
  const LatentModel model(small_config(marks));
  const ParamVector params = model.init_params(21);
  const EventSequence seq = random_sequence(6, 0.0, 6.0, marks, 22);
  const auto options = options_for(GetParam());
  const CheckpointGrid grid = make_grid(seq, 13);
  const ForwardResult fwd = forward_loss(model, params.values(), seq, grid, options);
  const Gradients grads = backward_grads(model, params.values(), seq, grid, fwd.record, options);

  const double h = 1e-6;
  auto shifted_loss = [&](std::size_t node, double delta) {
    CheckpointGrid g = grid;
    EventSequence s = seq;
    g.nodes[node].time += delta;
    if (g.nodes[node].event >= 0) s.events[static_cast<std::size_t>(g.nodes[node].event)].time += delta;
    if (node == 0) {
      g.t_start += delta;
      s.t_start += delta;
    }
    reweigh(g);
    return forward_loss(model, params.values(), s, g, options).loss.total;
  };
  for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
    const auto j = grid.nodes[i].event;
    if (j < 0) continue;
    const double fd = (shifted_loss(i, h) - shifted_loss(i, -h)) / (2 * h);
    EXPECT_TRUE(close(grads.devent_times[static_cast<std::size_t>(j)], fd, 1e-4, 1e-6))
        << "event " << j << ": " << grads.devent_times[static_cast<std::size_t>(j)] << " vs " << fd;
  }
  const double fd_t0 = (shifted_loss(0, h) - shifted_loss(0, -h)) / (2 * h);
  EXPECT_TRUE(close(grads.dt0, fd_t0, 1e-4, 1e-6)) << grads.dt0 << " vs " << fd_t0;
}

INSTANTIATE_TEST_SUITE_P(Compensators, TimeDiagnostics,
                         ::testing::Values(Compensator::quadrature, Compensator::exact));

TEST(Adjoint, CheckpointResetsDoNotChangeGradients) {
  const MarkSpace marks = MarkSpace::discrete(1);
  const LatentModel model(small_config(marks));
  const ParamVector params = model.init_params(31);
  const EventSequence seq = random_sequence(8, 0.0, 8.0, marks, 32);
  auto with_reset = tight_adjoint();
  auto without_reset = tight_adjoint();
  without_reset.reset_state_at_checkpoints = false;
  const auto a = loss_and_gradients(model, params.values(), seq, 30, with_reset).second;
  const auto b = loss_and_gradients(model, params.values(), seq, 30, without_reset).second;
  for (std::size_t i = 0; i < a.dtheta.size(); ++i) {
    EXPECT_TRUE(close(a.dtheta[i], b.dtheta[i], 1e-6, 1e-9));
  }
}

TEST(Adjoint, RejectsRecordFromAnotherGrid) {
  const LatentModel model(small_config(MarkSpace::discrete(1)));
  const ParamVector params = model.init_params(1);
  const EventSequence seq = random_sequence(3, 0.0, 3.0, MarkSpace::discrete(1), 2);
  const auto fwd = forward_loss(model, params.values(), seq, make_grid(seq, 5));
  EXPECT_THROW(backward_grads(model, params.values(), seq, make_grid(seq, 7), fwd.record),
               InvariantError);
}

TEST(Adjoint, EventOutsideWindowIsASchemaError) {
  const LatentModel model(small_config(MarkSpace::discrete(1)));
  const ParamVector params = model.init_params(1);
  EventSequence seq{0.0, 1.0, {Event{2.0, Mark{}}}};
  EXPECT_THROW(loss_and_gradients(model, params.values(), seq, 5), SchemaError);
}

}  // namespace
}  // namespace jumpflow
