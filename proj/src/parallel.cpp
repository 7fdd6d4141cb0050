#include "hdbf/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace hdbf {

namespace {
thread_local bool inside_worker = false;
}

std::size_t worker_count() {
  if (const char* env = std::getenv("HDBF_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

void parallel_for(std::int64_t count,
                  const std::function<void(std::int64_t)>& body) {
  if (count <= 0) return;
  std::size_t workers = worker_count();
  if (inside_worker || workers <= 1 || count == 1) {
    for (std::int64_t i = 0; i < count; ++i) body(i);
    return;
  }
  workers = std::min<std::size_t>(workers, static_cast<std::size_t>(count));

  // Index blocks handed out by an atomic cursor; block size keeps the
  // hand-off cost small without affecting which stream index i sees.
  const std::int64_t block =
      std::max<std::int64_t>(1, count / (8 * static_cast<std::int64_t>(workers)));
  std::atomic<std::int64_t> cursor{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto run = [&]() {
    inside_worker = true;
    for (;;) {
      const std::int64_t begin = cursor.fetch_add(block);
      if (begin >= count) break;
      const std::int64_t end = std::min(begin + block, count);
      try {
        for (std::int64_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        break;
      }
    }
    inside_worker = false;
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace hdbf
