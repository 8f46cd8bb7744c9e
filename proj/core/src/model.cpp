#include "jumpflow/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "jumpflow/activations.hpp"
#include "jumpflow/errors.hpp"

namespace jumpflow {
namespace {

constexpr double kOrthoGuard = 1e-12;
constexpr double kStdevFloor = 1e-3;
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

std::vector<std::size_t> widths_of(std::size_t in, const std::vector<std::size_t>& hidden,
                                   std::size_t out) {
  std::vector<std::size_t> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

std::size_t intensity_output_width(const MarkSpace& marks) {
  if (marks.is_discrete()) return marks.types;
  return 1 + marks.components + 2 * marks.components * marks.dim;
}

// Per-component log N(x; mu_g, sigma_g) + log pi_g for the mixture head.
struct MixtureTerms {
  std::vector<double> log_joint;
  double log_density = 0.0;
};

MixtureTerms mixture_terms(const MixtureParams& mix, std::span<const double> x) {
  MixtureTerms out;
  out.log_joint.resize(mix.components);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < mix.components; ++g) {
    double acc = std::log(mix.weights[g]);
    for (std::size_t d = 0; d < mix.dim; ++d) {
      const double sd = mix.stdevs[g * mix.dim + d];
      const double u = (x[d] - mix.means[g * mix.dim + d]) / sd;
      acc += -0.5 * u * u - std::log(sd) - kHalfLog2Pi;
    }
    out.log_joint[g] = acc;
    best = std::max(best, acc);
  }
  double sum = 0.0;
  for (double v : out.log_joint) sum += std::exp(v - best);
  out.log_density = best + std::log(sum);
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  if (n1 < 1 || n2 < 1) throw SchemaError("model widths n1 and n2 must be >= 1");
  marks.validate();
  for (const auto* hidden : {&flow_hidden, &decay_hidden, &jump_hidden, &intensity_hidden}) {
    for (std::size_t w : *hidden) {
      if (w < 1) throw SchemaError("hidden layer widths must be >= 1");
    }
  }
}

std::vector<double> MixtureParams::expected_value() const {
  std::vector<double> out(dim, 0.0);
  for (std::size_t g = 0; g < components; ++g) {
    for (std::size_t d = 0; d < dim; ++d) out[d] += weights[g] * means[g * dim + d];
  }
  return out;
}

double MixtureParams::log_density(std::span<const double> x) const {
  if (x.size() != dim) throw DimensionError("mixture log_density: feature width mismatch");
  return mixture_terms(*this, x).log_density;
}

LatentModel::LatentModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::size_t n = config_.state_dim();
  flow_net_ = Mlp(widths_of(n, config_.flow_hidden, config_.n1));
  decay_net_ = Mlp(widths_of(n, config_.decay_hidden, config_.n2));
  jump_net_ = Mlp(widths_of(config_.n1 + config_.marks.encoding_width(),
                            config_.jump_hidden, config_.n2));
  intensity_net_ =
      Mlp(widths_of(n, config_.intensity_hidden, intensity_output_width(config_.marks)));
  flow_offset_ = 0;
  decay_offset_ = flow_offset_ + flow_net_.param_count();
  jump_offset_ = decay_offset_ + decay_net_.param_count();
  intensity_offset_ = jump_offset_ + jump_net_.param_count();
  initial_offset_ = intensity_offset_ + intensity_net_.param_count();
  param_count_ = initial_offset_ + n;
}

ParamVector LatentModel::empty_params() const {
  ParamVector p;
  p.add_segment("flow", flow_net_.param_count());
  p.add_segment("decay", decay_net_.param_count());
  p.add_segment("jump", jump_net_.param_count());
  p.add_segment("intensity", intensity_net_.param_count());
  p.add_segment("initial_state", state_dim());
  return p;
}

ParamVector LatentModel::init_params(std::uint64_t seed) const {
  ParamVector p = empty_params();
  std::mt19937_64 rng(seed);
  flow_net_.init_uniform(p.view("flow"), rng);
  decay_net_.init_uniform(p.view("decay"), rng);
  jump_net_.init_uniform(p.view("jump"), rng);
  intensity_net_.init_uniform(p.view("intensity"), rng);
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  for (double& v : p.view("initial_state")) v = dist(rng);
  return p;
}

void LatentModel::check_params(const ParamVector& params) const {
  const ParamVector expected = empty_params();
  const auto& a = params.segments();
  const auto& b = expected.segments();
  if (a.size() != b.size()) throw SchemaError("parameter segment table does not match model");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || a[i].offset != b[i].offset || a[i].size != b[i].size) {
      throw SchemaError("parameter segment '" + a[i].name + "' does not match model layout");
    }
  }
}

std::span<const double> LatentModel::initial_state(std::span<const double> params) const {
  return params.subspan(initial_offset_, state_dim());
}

void LatentModel::flow(std::span<const double> params, std::span<const double> z,
                       std::span<double> dzdt, Workspace& ws) const {
  const std::size_t n1 = config_.n1;
  const std::size_t n2 = config_.n2;
  flow_net_.forward(net_params(params, flow_offset_, flow_net_), z, ws.flow);
  decay_net_.forward(net_params(params, decay_offset_, decay_net_), z, ws.decay);

  const auto c = z.first(n1);
  const auto h = z.subspan(n1, n2);
  const auto g = ws.flow.output();
  const double cc = dot(c, c);
  const double proj = cc > 0.0 ? dot(g, c) / std::max(cc, kOrthoGuard) : 0.0;
  for (std::size_t i = 0; i < n1; ++i) dzdt[i] = g[i] - proj * c[i];

  const auto r = ws.decay.output();
  for (std::size_t i = 0; i < n2; ++i) dzdt[n1 + i] = -softplus(r[i]) * h[i];
}

void LatentModel::flow_vjp(std::span<const double> params, std::span<const double> z,
                           std::span<const double> v, std::span<double> dz,
                           std::span<double> dtheta, Workspace& ws,
                           std::span<double> dzdt) const {
  const std::size_t n1 = config_.n1;
  const std::size_t n2 = config_.n2;
  const auto fp = net_params(params, flow_offset_, flow_net_);
  const auto dp = net_params(params, decay_offset_, decay_net_);
  flow_net_.forward(fp, z, ws.flow);
  decay_net_.forward(dp, z, ws.decay);

  const auto c = z.first(n1);
  const auto h = z.subspan(n1, n2);
  const auto vc = v.first(n1);
  const auto vh = v.subspan(n1, n2);
  const auto g = ws.flow.output();

  // Internal state: f_c = g - (g.c / s) c with s = max(c.c, guard).
  ws.cot.assign(n1, 0.0);
  const double cc = dot(c, c);
  const auto r = ws.decay.output();
  if (!dzdt.empty()) {
    const double proj = cc > 0.0 ? dot(g, c) / std::max(cc, kOrthoGuard) : 0.0;
    for (std::size_t i = 0; i < n1; ++i) dzdt[i] = g[i] - proj * c[i];
    for (std::size_t i = 0; i < n2; ++i) dzdt[n1 + i] = -softplus(r[i]) * h[i];
  }
  if (cc > 0.0) {
    const double s = std::max(cc, kOrthoGuard);
    const double alpha = dot(g, c);
    const double beta = dot(vc, c);
    for (std::size_t i = 0; i < n1; ++i) ws.cot[i] = vc[i] - (beta / s) * c[i];
    if (!dz.empty()) {
      const double ds = cc >= kOrthoGuard ? 2.0 * alpha * beta / (s * s) : 0.0;
      for (std::size_t i = 0; i < n1; ++i) {
        dz[i] += -(beta * g[i] + alpha * vc[i]) / s + ds * c[i];
      }
    }
  } else {
    for (std::size_t i = 0; i < n1; ++i) ws.cot[i] = vc[i];
  }
  flow_net_.vjp(fp, ws.flow, ws.cot, dz, net_grad(dtheta, flow_offset_, flow_net_));

  // Event memory: f_h = -softplus(r) * h.
  ws.tmp.assign(n2, 0.0);
  for (std::size_t i = 0; i < n2; ++i) {
    ws.tmp[i] = -vh[i] * h[i] * softplus_grad(r[i]);
    if (!dz.empty()) dz[n1 + i] += -vh[i] * softplus(r[i]);
  }
  decay_net_.vjp(dp, ws.decay, ws.tmp, dz, net_grad(dtheta, decay_offset_, decay_net_));
}

void LatentModel::encode_jump_input(std::span<const double> z, const Mark& mark,
                                    std::vector<double>& out) const {
  const std::size_t n1 = config_.n1;
  const MarkSpace& marks = config_.marks;
  out.assign(n1 + marks.encoding_width(), 0.0);
  std::copy(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(n1), out.begin());
  if (marks.is_discrete()) {
    if (mark.type >= marks.types) throw DimensionError("mark type outside mark space");
    out[n1 + mark.type] = 1.0;
  } else {
    if (mark.features.size() != marks.dim) {
      throw DimensionError("mark feature width " + std::to_string(mark.features.size()) +
                           " != " + std::to_string(marks.dim));
    }
    std::copy(mark.features.begin(), mark.features.end(),
              out.begin() + static_cast<std::ptrdiff_t>(n1));
  }
}

void LatentModel::jump(std::span<const double> params, std::span<const double> z,
                       const Mark& mark, std::span<double> dz, Workspace& ws) const {
  encode_jump_input(z, mark, ws.input);
  jump_net_.forward(net_params(params, jump_offset_, jump_net_), ws.input, ws.jump);
  const auto w = ws.jump.output();
  std::fill(dz.begin(), dz.begin() + static_cast<std::ptrdiff_t>(config_.n1), 0.0);
  std::copy(w.begin(), w.end(), dz.begin() + static_cast<std::ptrdiff_t>(config_.n1));
}

void LatentModel::jump_vjp(std::span<const double> params, std::span<const double> z,
                           const Mark& mark, std::span<const double> v, std::span<double> dz,
                           std::span<double> dtheta, Workspace& ws) const {
  const std::size_t n1 = config_.n1;
  encode_jump_input(z, mark, ws.input);
  const auto jp = net_params(params, jump_offset_, jump_net_);
  jump_net_.forward(jp, ws.input, ws.jump);
  ws.tmp.assign(ws.input.size(), 0.0);
  jump_net_.vjp(jp, ws.jump, v.subspan(n1, config_.n2), ws.tmp,
                net_grad(dtheta, jump_offset_, jump_net_));
  if (!dz.empty()) {
    for (std::size_t i = 0; i < n1; ++i) dz[i] += ws.tmp[i];
  }
}

void LatentModel::intensity_forward(std::span<const double> params,
                                    std::span<const double> z, Workspace& ws) const {
  intensity_net_.forward(net_params(params, intensity_offset_, intensity_net_), z,
                         ws.intensity);
}

IntensityEval LatentModel::intensity(std::span<const double> params,
                                     std::span<const double> z, Workspace& ws) const {
  intensity_forward(params, z, ws);
  const auto o = ws.intensity.output();
  IntensityEval out;
  if (config_.marks.is_discrete()) {
    out.per_type.resize(config_.marks.types);
    for (std::size_t k = 0; k < out.per_type.size(); ++k) {
      out.per_type[k] = softplus(o[k]);
      out.total += out.per_type[k];
    }
  } else {
    out.total = softplus(o[0]);
  }
  return out;
}

double LatentModel::intensity_grad(std::span<const double> params,
                                   std::span<const double> z, double scale,
                                   std::span<double> dz, std::span<double> dtheta,
                                   Workspace& ws) const {
  intensity_forward(params, z, ws);
  const auto o = ws.intensity.output();
  ws.cot.assign(o.size(), 0.0);
  double total = 0.0;
  if (config_.marks.is_discrete()) {
    for (std::size_t k = 0; k < config_.marks.types; ++k) {
      total += softplus(o[k]);
      ws.cot[k] = scale * softplus_grad(o[k]);
    }
  } else {
    total = softplus(o[0]);
    ws.cot[0] = scale * softplus_grad(o[0]);
  }
  if (scale != 0.0 && (!dz.empty() || !dtheta.empty())) {
    intensity_net_.vjp(net_params(params, intensity_offset_, intensity_net_), ws.intensity,
                       ws.cot, dz, net_grad(dtheta, intensity_offset_, intensity_net_));
  }
  return total;
}

namespace {

MixtureParams decode_mixture(std::span<const double> o, const MarkSpace& marks) {
  const std::size_t G = marks.components;
  const std::size_t d = marks.dim;
  MixtureParams mix;
  mix.components = G;
  mix.dim = d;
  mix.weights.resize(G);
  const auto logits = o.subspan(1, G);
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t g = 0; g < G; ++g) {
    mix.weights[g] = std::exp(logits[g] - top);
    sum += mix.weights[g];
  }
  for (double& w : mix.weights) w /= sum;
  const auto means = o.subspan(1 + G, G * d);
  const auto raw = o.subspan(1 + G + G * d, G * d);
  mix.means.assign(means.begin(), means.end());
  mix.stdevs.resize(G * d);
  for (std::size_t i = 0; i < G * d; ++i) mix.stdevs[i] = softplus(raw[i]) + kStdevFloor;
  return mix;
}

}  // namespace

MixtureParams LatentModel::mixture(std::span<const double> params,
                                   std::span<const double> z, Workspace& ws) const {
  if (config_.marks.is_discrete()) {
    throw InvariantError("mixture() requires a continuous mark space");
  }
  intensity_forward(params, z, ws);
  return decode_mixture(ws.intensity.output(), config_.marks);
}

std::vector<double> LatentModel::type_probabilities(std::span<const double> params,
                                                    std::span<const double> z,
                                                    Workspace& ws) const {
  if (!config_.marks.is_discrete()) {
    throw InvariantError("type_probabilities() requires a discrete mark space");
  }
  IntensityEval lam = intensity(params, z, ws);
  for (double& p : lam.per_type) p /= lam.total;
  return lam.per_type;
}

double LatentModel::mark_logprob(std::span<const double> params, std::span<const double> z,
                                 const Mark& mark, Workspace& ws) const {
  if (config_.marks.is_discrete()) {
    if (mark.type >= config_.marks.types) throw DimensionError("mark type outside mark space");
    const IntensityEval lam = intensity(params, z, ws);
    return std::log(lam.per_type[mark.type]) - std::log(lam.total);
  }
  if (mark.features.size() != config_.marks.dim) {
    throw DimensionError("mark feature width mismatch");
  }
  return mixture(params, z, ws).log_density(mark.features);
}

std::pair<double, double> LatentModel::event_nll(std::span<const double> params,
                                                 std::span<const double> z,
                                                 const Mark& mark, std::span<double> dz,
                                                 std::span<double> dtheta,
                                                 Workspace& ws) const {
  intensity_forward(params, z, ws);
  const auto o = ws.intensity.output();
  const MarkSpace& marks = config_.marks;
  ws.cot.assign(o.size(), 0.0);
  double nll_lambda = 0.0;
  double nll_mark = 0.0;

  if (marks.is_discrete()) {
    if (mark.type >= marks.types) throw DimensionError("mark type outside mark space");
    double total = 0.0;
    for (std::size_t k = 0; k < marks.types; ++k) total += softplus(o[k]);
    const double lam_k = softplus(o[mark.type]);
    nll_lambda = -std::log(total);
    nll_mark = -(std::log(lam_k) - std::log(total));
    // -log lambda - log p = -log lambda_k.
    ws.cot[mark.type] = -softplus_grad(o[mark.type]) / lam_k;
  } else {
    if (mark.features.size() != marks.dim) throw DimensionError("mark feature width mismatch");
    const std::size_t G = marks.components;
    const std::size_t d = marks.dim;
    const double lam = softplus(o[0]);
    nll_lambda = -std::log(lam);
    ws.cot[0] = -softplus_grad(o[0]) / lam;

    const MixtureParams mix = decode_mixture(o, marks);
    const MixtureTerms terms = mixture_terms(mix, mark.features);
    nll_mark = -terms.log_density;
    const auto raw = o.subspan(1 + G + G * d, G * d);
    for (std::size_t g = 0; g < G; ++g) {
      const double resp = std::exp(terms.log_joint[g] - terms.log_density);
      ws.cot[1 + g] = -(resp - mix.weights[g]);
      for (std::size_t j = 0; j < d; ++j) {
        const std::size_t idx = g * d + j;
        const double sd = mix.stdevs[idx];
        const double diff = mark.features[j] - mix.means[idx];
        ws.cot[1 + G + idx] = -resp * diff / (sd * sd);
        const double dsd = resp * (diff * diff / (sd * sd * sd) - 1.0 / sd);
        ws.cot[1 + G + G * d + idx] = -dsd * softplus_grad(raw[idx]);
      }
    }
  }
  if (!dz.empty() || !dtheta.empty()) {
    intensity_net_.vjp(net_params(params, intensity_offset_, intensity_net_), ws.intensity,
                       ws.cot, dz, net_grad(dtheta, intensity_offset_, intensity_net_));
  }
  return {nll_lambda, nll_mark};
}

Mark LatentModel::sample_mark(std::span<const double> params, std::span<const double> z,
                              std::mt19937_64& rng, Workspace& ws) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Mark mark;
  if (config_.marks.is_discrete()) {
    const IntensityEval lam = intensity(params, z, ws);
    const double u = unif(rng) * lam.total;
    double acc = 0.0;
    mark.type = lam.per_type.size() - 1;
    for (std::size_t k = 0; k < lam.per_type.size(); ++k) {
      acc += lam.per_type[k];
      if (u < acc) {
        mark.type = k;
        break;
      }
    }
    return mark;
  }
  const MixtureParams mix = mixture(params, z, ws);
  const double u = unif(rng);
  double acc = 0.0;
  std::size_t comp = mix.components - 1;
  for (std::size_t g = 0; g < mix.components; ++g) {
    acc += mix.weights[g];
    if (u < acc) {
      comp = g;
      break;
    }
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  mark.features.resize(mix.dim);
  for (std::size_t j = 0; j < mix.dim; ++j) {
    mark.features[j] =
        mix.means[comp * mix.dim + j] + mix.stdevs[comp * mix.dim + j] * normal(rng);
  }
  return mark;
}

SolverStats LatentModel::sweep(std::span<const double> params, double t0,
                               std::span<const double> z0, std::span<const SweepNode> nodes,
                               const SolverOptions& options,
                               const SweepVisitor& visit, double* intensity_integral) const {
  const std::size_t n = state_dim();
  if (z0.size() != n) throw DimensionError("sweep: initial state width mismatch");
  const bool integrate = intensity_integral != nullptr;
  const std::size_t dim = integrate ? n + 1 : n;
  Workspace ws;
  DormandPrince solver(
      dim,
      [&](double, std::span<const double> y, std::span<double> dy) {
        flow(params, y.first(n), dy.first(n), ws);
        if (integrate) dy[n] = intensity(params, y.first(n), ws).total;
      },
      options);
  const double span = nodes.empty() ? 1.0 : std::max(nodes.back().time - t0, 1e-300);
  std::vector<double> start(dim, 0.0);
  std::copy(z0.begin(), z0.end(), start.begin());
  solver.reset(t0, start, span);

  Workspace jump_ws;
  std::vector<double> right(dim), delta(n);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const SweepNode& node = nodes[i];
    if (node.time < solver.time()) throw InvariantError("sweep nodes must be sorted");
    solver.advance_to(node.time);
    const auto state = solver.state();
    const auto left = state.first(n);
    if (node.event == nullptr) {
      visit(i, left, left);
      continue;
    }
    jump(params, left, node.event->mark, delta, jump_ws);
    for (std::size_t k = 0; k < n; ++k) right[k] = left[k] + delta[k];
    if (integrate) right[n] = state[n];
    visit(i, left, std::span<const double>(right).first(n));
    solver.set_state(right);
  }
  if (integrate) *intensity_integral = solver.state()[n];
  return solver.stats();
}

}  // namespace jumpflow
