#ifndef MANIFOLD_PARALLEL_HPP
#define MANIFOLD_PARALLEL_HPP

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace manifold {

// Worker count: MANIFOLD_RESTORE_THREADS caps it, hardware otherwise.
inline int thread_budget() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("MANIFOLD_RESTORE_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) hw = std::min(hw, cap);
  }
  return hw;
}

// Static block partition over [begin, end). Bodies must write disjoint
// outputs; results are then independent of the worker count.
template <class F>
void parallel_for(int begin, int end, F&& body) {
  const int n = end - begin;
  if (n <= 0) return;
  const int workers = std::min(thread_budget(), n);
  if (workers == 1) {
    for (int i = begin; i < end; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const int chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int lo = begin + w * chunk;
    const int hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body, &failure, &failure_mutex] {
      try {
        for (int i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace manifold

#endif
