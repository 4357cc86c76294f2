#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mwcc::detail {

// Worker cap: MWCC_THREADS if set to a positive integer, else the hardware
// concurrency.
inline std::size_t worker_limit() {
  if (const char* env = std::getenv("MWCC_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Splits [0, count) into contiguous chunks and runs fn(begin, end) on worker
// threads. Callers write results by index, so output never depends on the
// schedule. The first exception thrown by a worker is rethrown.
template <class Fn>
void parallel_for(std::size_t count, std::size_t min_chunk, Fn&& fn) {
  if (count == 0) return;
  const std::size_t hw = worker_limit();
  const std::size_t workers = std::min<std::size_t>(hw, (count + min_chunk - 1) / std::max<std::size_t>(min_chunk, 1));
  if (workers <= 1) {
    fn(std::size_t{0}, count);
    return;
  }
  const std::size_t chunk = (count + workers - 1) / workers;
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    threads.emplace_back([&, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace mwcc::detail
