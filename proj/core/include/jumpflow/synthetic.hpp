#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "jumpflow/classical.hpp"
#include "jumpflow/events.hpp"

namespace jumpflow {

/// Seed for the i-th sequence of a corpus generated from `seed`.
std::uint64_t sequence_seed(std::uint64_t seed, std::size_t index);

/// `count` independent sequences of `spec` on [t0, t_end], generated in
/// parallel; sequence i uses sequence_seed(seed, i).
std::vector<EventSequence> generate_corpus(const ClassicalProcessSpec& spec, std::size_t count,
                                           double t0, double t_end, std::uint64_t seed);

/// Copy of `seq` with one real feature per event: the time since the previous
/// event, or since t_start for the first event.
EventSequence with_interval_features(const EventSequence& seq);

struct StickyTypes {
  std::size_t types = 22;
  double stay = 0.8;  // probability of repeating the previous type
};

/// Relabels events with a sticky Markov chain: the first type and every
/// switch draw from a skewed base distribution p(k) proportional to 1/(k+1).
EventSequence with_sticky_types(const EventSequence& seq, const StickyTypes& options,
                                std::uint64_t seed);

}  // namespace jumpflow
