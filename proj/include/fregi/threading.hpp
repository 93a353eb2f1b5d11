#pragma once

#include "fregi/types.hpp"

#include <functional>
#include <vector>

namespace fregi {

// Worker-thread count resolution: explicit argument > FLUOROREGI_THREADS env
// var > hardware concurrency.
int default_thread_count();

// Minimal blocking fork-join pool.  parallel_for runs fn(i) for i in
// [0, count); indices are claimed dynamically but results must be written to
// index-addressed storage by the caller, which keeps outputs independent of
// scheduling order and thread count.
class ThreadPool {
 public:
  explicit ThreadPool(int threads = 0);  // <= 0 resolves via default_thread_count
  ~ThreadPool();

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int thread_count() const { return threads_; }

  void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

 private:
  int threads_ = 1;
  struct Impl;
  Impl* impl_ = nullptr;
};

// Evaluates obj at every point, results in index order.  pool == nullptr or a
// single-thread pool evaluates serially.
std::vector<double> batch_eval(ThreadPool* pool, const std::vector<VecX>& pts,
                               const std::function<double(const VecX&)>& obj);

}  // namespace fregi
