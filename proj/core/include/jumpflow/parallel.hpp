#pragma once

#include <cstddef>
#include <functional>

namespace jumpflow {

/// Worker count for `tasks` independent jobs: hardware concurrency, capped by
/// the JUMPFLOW_THREADS environment variable when it holds a positive integer.
std::size_t worker_count(std::size_t tasks);

/// Runs body(index, worker) for index in [0, n). Each worker id in
/// [0, worker_count(n)) is used by one thread at a time, so per-worker scratch
/// can be indexed by it. The first exception thrown is rethrown after all
/// workers finish.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t index, std::size_t worker)>& body);

}  // namespace jumpflow
