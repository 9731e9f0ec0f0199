#include "felogit/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace felogit {

namespace {
std::atomic<int> g_thread_cap{0};
}

void set_thread_cap(int n) { g_thread_cap.store(n > 0 ? n : 0); }

int effective_threads() {
  const int cap = g_thread_cap.load();
  if (cap > 0) return cap;
  if (const char* env = std::getenv("FELOGIT_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(std::size_t n,
                  const std::function<void(std::size_t)>& body) {
  const int workers = effective_threads();
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int spawned = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(workers), n));
  pool.reserve(static_cast<std::size_t>(spawned));
  for (int w = 1; w < spawned; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace felogit
