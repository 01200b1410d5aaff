#pragma once

// Indexed job execution. Results are stored by job index, so the merged
// output never depends on completion order or on the worker count.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace gwbayes {

/// Worker count from GWBAYES_WORKERS, falling back to 1.
int default_worker_count();

template <class Fn>
auto parallel_map(std::size_t n_jobs, int workers, Fn&& fn) -> std::vector<decltype(fn(std::size_t{}))> {
  using Result = decltype(fn(std::size_t{}));
  std::vector<Result> results(n_jobs);
  const auto n_threads = static_cast<std::size_t>(std::clamp<long>(workers, 1, static_cast<long>(std::max<std::size_t>(n_jobs, 1))));
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < n_jobs; ++i) results[i] = fn(i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n_jobs);
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < n_jobs; i = next.fetch_add(1)) {
      try {
        results[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  // The lowest failing index wins, as it would in a serial run.
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace gwbayes
