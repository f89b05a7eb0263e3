#include "selfmvs/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace selfmvs {
namespace {

std::atomic<int> g_num_threads{1};

}  // namespace

void set_num_threads(int n) { g_num_threads = std::max(1, n); }

int num_threads() { return g_num_threads; }

void parallel_rows(int rows, const std::function<void(int)>& fn) {
  const int workers = std::min(num_threads(), rows);
  if (workers <= 1) {
    for (int r = 0; r < rows; ++r) fn(r);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  const int block = (rows + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int begin = w * block;
    const int end = std::min(rows, begin + block);
    pool.emplace_back([&, begin, end] {
      try {
        for (int r = begin; r < end; ++r) fn(r);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace selfmvs
