#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace vfluct {

/// Worker count: VF_THREADS when set to a positive integer, otherwise the
/// hardware concurrency. Never changes results, only wall time.
inline std::size_t worker_count() {
  if (const char* env = std::getenv("VF_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Runs body(begin, end) over a static partition of [0, n). Every index is
/// owned by exactly one call, so per-index outputs do not depend on the
/// worker count. If several blocks throw, the exception of the lowest block
/// is rethrown.
template <class Body>
void parallel_for(std::size_t n, Body&& body, std::size_t workers = worker_count()) {
  if (n == 0) return;
  workers = std::clamp<std::size_t>(workers, 1, n);
  if (workers == 1) {
    body(std::size_t{0}, n);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = n * w / workers;
      const std::size_t end = n * (w + 1) / workers;
      pool.emplace_back([&, w, begin, end] {
        try {
          body(begin, end);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace vfluct
