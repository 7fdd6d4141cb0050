#pragma once

#include <cstdint>
#include <functional>

namespace hdbf {

// Worker count: HDBF_THREADS when set (>= 1), else hardware concurrency.
// Re-read on every call so tests can vary it at runtime.
std::size_t worker_count();

// Runs body(i) for i in [0, count). Work is addressed by index, so anything
// the body derives from i alone (RNG streams included) is independent of the
// worker count and of scheduling. Nested calls run serially inside an outer
// worker. The first exception thrown by any body is rethrown in the caller.
void parallel_for(std::int64_t count, const std::function<void(std::int64_t)>& body);

}  // namespace hdbf
