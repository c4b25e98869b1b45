#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace imcvf {

// IMCVF_THREADS caps worker count (0 or unset = all cores).
inline unsigned thread_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* s = std::getenv("IMCVF_THREADS")) {
    long n = std::strtol(s, nullptr, 10);
    if (n > 0) return static_cast<unsigned>(std::min<long>(n, 1024));
  }
  return hw;
}

// fn(begin, end) over contiguous chunks; the first exception is rethrown.
template <class Fn>
void parallel_chunks(std::size_t n, Fn&& fn) {
  unsigned nt = std::min<std::size_t>(thread_count(), std::max<std::size_t>(1, n / 64));
  if (nt <= 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex mu;
  std::size_t chunk = (n + nt - 1) / nt;
  for (unsigned w = 0; w < nt; ++w) {
    std::size_t b = w * chunk, e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&, b, e] {
      try {
        fn(b, e);
      } catch (...) {
        std::lock_guard lk(mu);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace imcvf
