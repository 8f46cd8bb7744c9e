#include "jumpflow/synthetic.hpp"

#include <random>
#include <stdexcept>

#include "jumpflow/parallel.hpp"

namespace jumpflow {

std::uint64_t sequence_seed(std::uint64_t seed, std::size_t index) {
  // splitmix64 finalizer
  std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(index) + 1);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::vector<EventSequence> generate_corpus(const ClassicalProcessSpec& spec, std::size_t count,
                                           double t0, double t_end, std::uint64_t seed) {
  validate(spec);
  std::vector<EventSequence> out(count);
  parallel_for(count, [&](std::size_t i, std::size_t) {
    out[i] = simulate_classical(spec, t0, t_end, sequence_seed(seed, i));
  });
  return out;
}

EventSequence with_interval_features(const EventSequence& seq) {
  EventSequence out = seq;
  double previous = seq.t_start;
  for (Event& e : out.events) {
    e.mark = Mark{0, {e.time - previous}};
    previous = e.time;
  }
  return out;
}

EventSequence with_sticky_types(const EventSequence& seq, const StickyTypes& options,
                                std::uint64_t seed) {
  if (options.types == 0) throw std::invalid_argument("sticky types: need at least one type");
  if (!(options.stay >= 0.0 && options.stay <= 1.0)) {
    throw std::invalid_argument("sticky types: stay probability must lie in [0, 1]");
  }
  std::vector<double> base(options.types);
  for (std::size_t k = 0; k < options.types; ++k) base[k] = 1.0 / static_cast<double>(k + 1);
  std::discrete_distribution<std::size_t> draw(base.begin(), base.end());
  std::bernoulli_distribution keep(options.stay);
  std::mt19937_64 rng(seed);

  EventSequence out = seq;
  for (std::size_t j = 0; j < out.events.size(); ++j) {
    std::size_t type = 0;
    if (j > 0 && keep(rng)) {
      type = out.events[j - 1].mark.type;
    } else {
      type = draw(rng);
    }
    out.events[j].mark = Mark{type, {}};
  }
  return out;
}

}  // namespace jumpflow
