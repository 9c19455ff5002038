#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace odegs {

namespace detail {
inline std::atomic<bool>& deterministic_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}
}  // namespace detail

// Forces every parallel_for onto the calling thread. Parallel loops never
// share reductions across workers, so results do not depend on this flag;
// it exists for reproducibility runs that want a single execution order.
inline void set_deterministic(bool on) { detail::deterministic_flag() = on; }
inline bool deterministic() { return detail::deterministic_flag(); }

// Splits [0, n) into contiguous chunks, one per hardware thread.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  std::size_t workers = deterministic() ? 1 : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace odegs
