#ifndef PATCHCP_UTIL_HPP
#define PATCHCP_UTIL_HPP

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace patchcp {

/**
 * Runs fn(i) for i in [0, n) on up to `threads` worker threads (0 = hardware
 * concurrency).  Work is handed out through an atomic counter; callers that
 * need deterministic aggregation should write into a preallocated slot per
 * index and reduce in index order afterwards.
 */
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                         unsigned threads = 0) {
  if (threads == 0) threads = std::thread::hardware_concurrency();
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  if (threads > n) threads = static_cast<unsigned>(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

/// FNV-1a 64-bit hash of a byte buffer (used for output-file manifests).
inline uint64_t fnv1a64(const void* data, std::size_t len, uint64_t h = 0xcbf29ce484222325ull) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Shortest round-trip decimal form of a double (deterministic across runs).
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = 0.0;
  std::sscanf(buf, "%lf", &back);
  if (back == v) {
    // try shorter representations that still round-trip
    for (int prec = 1; prec < 17; ++prec) {
      char shorter[40];
      std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
      std::sscanf(shorter, "%lf", &back);
      if (back == v) return shorter;
    }
  }
  return buf;
}

/// Mean and standard error of a Bernoulli estimate from `successes` in `n`.
struct McEstimate {
  double mean = 0.0;
  double se = 0.0;
};

inline McEstimate bernoulli_estimate(std::size_t successes, std::size_t n) {
  McEstimate e;
  if (n == 0) return e;
  e.mean = static_cast<double>(successes) / static_cast<double>(n);
  e.se = std::sqrt(e.mean * (1.0 - e.mean) / static_cast<double>(n));
  return e;
}

}  // namespace patchcp

#endif  // PATCHCP_UTIL_HPP
