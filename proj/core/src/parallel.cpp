#include "vsdalign/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace vsdalign {
namespace {

std::atomic<std::size_t> g_override{0};

std::size_t default_threads() {
  static const std::size_t n = [] {
    std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("VSDALIGN_THREADS")) {
      try {
        const long v = std::stol(env);
        if (v >= 1) return std::min<std::size_t>(static_cast<std::size_t>(v), hw);
      } catch (...) {
      }
    }
    return hw;
  }();
  return n;
}

}  // namespace

std::size_t thread_count() {
  const auto o = g_override.load();
  return o ? o : default_threads();
}

void set_thread_count(std::size_t n) { g_override.store(n); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  // Spawning is not worth it for small batches.
  const std::size_t workers = std::min(thread_count(), n / 64 + 1);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] {
      for (std::size_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (std::size_t i = 0; i < std::min(n, chunk); ++i) body(i);
}

}  // namespace vsdalign
