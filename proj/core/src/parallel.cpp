#include "fisheyedist/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace fisheyedist {

int thread_budget() {
  const char* env = std::getenv("FDNET_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  const int n = std::atoi(env);
  return n <= 1 ? 1 : n;
}

void parallel_rows(int height, const std::function<void(int)>& fn) {
  const int workers = std::min(thread_budget(), height);
  if (workers <= 1) {
    for (int y = 0; y < height; ++y) fn(y);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (int y = next.fetch_add(1); y < height; y = next.fetch_add(1)) fn(y);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace fisheyedist
