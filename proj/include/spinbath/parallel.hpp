#pragma once

// Static work split over a fixed number of threads. Task i always writes its
// own output slot, so results never depend on the worker count.

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace spinbath {

// Worker count from SPINBATH_WORKERS, else hardware concurrency (min 1).
int default_workers();

template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  const std::size_t w = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(workers, 1)));
  if (w <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr first_error;
  std::size_t first_index = count;
  std::mutex m;
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (std::size_t t = 0; t < w; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < count; i += w) {
        try {
          fn(i);
        } catch (...) {
          // Keep the error of the lowest task index so failures are reproducible too.
          std::lock_guard<std::mutex> lock(m);
          if (i < first_index) {
            first_index = i;
            first_error = std::current_exception();
          }
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace spinbath
