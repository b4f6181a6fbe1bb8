#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace medfx {

// Runs fn(i) for i in [0, n). Results must be written to preallocated,
// index-addressed storage inside fn; aggregation order is then independent of
// the thread count, which keeps outputs bit-identical for any --threads value.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (threads <= 0) threads = hw > 0 ? hw : 1;
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        int i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failed.load() && first_error) std::rethrow_exception(first_error);
}

}  // namespace medfx
