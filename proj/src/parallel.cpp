#include "martin/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace martin {

namespace {
std::atomic<int> forced_workers{0};
}

void set_worker_count(int n) { forced_workers = n > 0 ? n : 0; }

int worker_count() {
  if (const int f = forced_workers.load(); f > 0) return f;
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("MARTIN_RECOVER_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap > 0) n = std::min(n, cap);
    } catch (const std::exception&) {
      // ignore junk in the variable
    }
  }
  return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  int workers) {
  if (n == 0) return;
  if (workers <= 0) workers = worker_count();
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  if (w == 1) {
    body(0, n);
    return;
  }
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (std::size_t t = 0; t < w; ++t) {
    const std::size_t begin = n * t / w, end = n * (t + 1) / w;
    pool.emplace_back([&, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace martin
