#pragma once

#include <functional>

namespace ipp {

/// Runs job(0) .. job(count - 1) on up to `workers` threads. Jobs must only
/// write their own output slot; results are then independent of `workers`.
/// The first exception thrown by a job is rethrown after all threads join.
void parallel_for(int count, int workers, const std::function<void(int)>& job);

}  // namespace ipp
