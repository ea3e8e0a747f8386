#include "geoflow/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace geoflow {

namespace {

int initial_threads() {
  const char* env = std::getenv("GEOFLOW_THREADS");
  if (env) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

std::atomic<int>& threads_ref() {
  static std::atomic<int> t{initial_threads()};
  return t;
}

}  // namespace

int thread_count() { return threads_ref().load(); }

void set_thread_count(int n) { threads_ref().store(std::max(1, n)); }

void parallel_for(int n, const std::function<void(int)>& body) {
  int T = std::min(thread_count(), n);
  if (T <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int t = 0; t < T; ++t) {
    pool.emplace_back([&] {
      while (true) {
        int i = next.fetch_add(1);
        if (i >= n) break;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace geoflow
