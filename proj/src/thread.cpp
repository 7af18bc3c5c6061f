#include "elves/thread.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <vector>

namespace elves {

void parallel_for(size_t count, unsigned workers, const std::function<void(size_t)>& fn) {
  if (count == 0) return;
  if (workers == 0) workers = default_workers();
  if (workers > count) workers = unsigned(count);
  if (workers == 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr err;
  auto body = [&] {
    for (;;) {
      size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> g(err_mutex);
        if (!err) err = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(workers - 1);
  for (unsigned w = 0; w + 1 < workers; ++w) threads.emplace_back(body);
  body();
  for (auto& t : threads) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace elves
