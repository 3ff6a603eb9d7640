#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace smx {

/// Worker count from SMX_THREADS, falling back to hardware concurrency.
std::size_t default_workers();

/// Resolves a requested worker count (0 = default_workers()).
std::size_t resolve_workers(std::size_t requested);

/// Runs body(item, worker) for item in [0, count) on up to `workers` threads.
/// Items are handed out dynamically; the first exception is rethrown.
template <class Body>
void parallel_for(std::size_t count, std::size_t workers, Body&& body) {
  workers = resolve_workers(workers);
  if (workers > count) workers = count;
  if (workers <= 1) {
    for (std::size_t item = 0; item < count; ++item) body(item, std::size_t{0});
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&](std::size_t worker) {
    try {
      for (std::size_t item = next.fetch_add(1); item < count; item = next.fetch_add(1)) {
        body(item, worker);
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next.store(count);
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(run, w);
  run(0);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace smx
