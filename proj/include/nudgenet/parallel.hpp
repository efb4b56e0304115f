#pragma once

#include <cstddef>
#include <functional>

namespace nudgenet {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work is handed out by
/// index, so callers that write results into slot i get output independent of
/// the job count. The first exception thrown by any task is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

/// Default job count: hardware concurrency, at least 1.
int default_jobs();

}  // namespace nudgenet
