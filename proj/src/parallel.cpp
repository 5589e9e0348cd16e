#include "magweyl/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace magweyl {

int worker_count() {
  if (const char* env = std::getenv(kThreadsEnv)) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, int workers) {
  if (n == 0) return;
  const std::size_t w = std::min<std::size_t>(n, static_cast<std::size_t>(workers > 0 ? workers : worker_count()));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run_block = [&](std::size_t begin, std::size_t end) {
    try {
      for (std::size_t i = begin; i < end; ++i) body(i);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(w - 1);
  const std::size_t chunk = n / w;
  const std::size_t extra = n % w;
  std::size_t begin = 0;
  std::size_t first_end = 0;
  for (std::size_t t = 0; t < w; ++t) {
    const std::size_t end = begin + chunk + (t < extra ? 1 : 0);
    if (t == 0) {
      first_end = end;
    } else {
      threads.emplace_back(run_block, begin, end);
    }
    begin = end;
  }
  run_block(0, first_end);
  for (auto& th : threads) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace magweyl
