#pragma once

#include <omp.h>

#include <cstdint>
#include <exception>
#include <mutex>

namespace ang::detail {

inline int resolve_threads(int threads) { return threads > 0 ? threads : omp_get_max_threads(); }

// Runs fn(i) for i in [0, n) on an OpenMP team. Each index is independent, so
// outputs written by index are identical for any thread count. The first
// exception thrown by any worker is rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::int64_t n, int threads, Fn&& fn) {
  std::exception_ptr failure;
  std::mutex mu;
#pragma omp parallel for schedule(dynamic, 1) num_threads(resolve_threads(threads))
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
      std::lock_guard lock(mu);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace ang::detail

namespace ang {
using detail::parallel_for;
}
