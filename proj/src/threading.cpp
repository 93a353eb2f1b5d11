#include "fregi/threading.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace fregi {

int default_thread_count() {
  if (const char* env = std::getenv("FLUOROREGI_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? int(hw) : 1;
}

// Persistent workers wait on a generation counter; each parallel_for bumps the
// generation, workers drain a shared index counter, and the caller joins via a
// completion count.
struct ThreadPool::Impl {
  std::mutex mu;
  std::condition_variable cv_work;
  std::condition_variable cv_done;
  const std::function<void(std::size_t)>* fn = nullptr;
  std::size_t count = 0;
  std::atomic<std::size_t> next{0};
  std::size_t generation = 0;
  int active = 0;
  bool stop = false;
  std::vector<std::thread> workers;

  void worker_loop() {
    std::size_t seen_gen = 0;
    for (;;) {
      {
        std::unique_lock<std::mutex> lk(mu);
        cv_work.wait(lk, [&] { return stop || generation != seen_gen; });
        if (stop) return;
        seen_gen = generation;
      }
      for (;;) {
        const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
        if (i >= count) break;
        (*fn)(i);
      }
      std::unique_lock<std::mutex> lk(mu);
      if (--active == 0) cv_done.notify_all();
    }
  }
};

ThreadPool::ThreadPool(int threads) {
  threads_ = threads > 0 ? threads : default_thread_count();
  if (threads_ > 1) {
    impl_ = new Impl;
    impl_->workers.reserve(threads_);
    for (int i = 0; i < threads_; ++i) {
      impl_->workers.emplace_back([this] { impl_->worker_loop(); });
    }
  }
}

ThreadPool::~ThreadPool() {
  if (impl_) {
    {
      std::lock_guard<std::mutex> lk(impl_->mu);
      impl_->stop = true;
    }
    impl_->cv_work.notify_all();
    for (auto& w : impl_->workers) w.join();
    delete impl_;
  }
}

void ThreadPool::parallel_for(std::size_t count,
                              const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  if (!impl_) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::unique_lock<std::mutex> lk(impl_->mu);
  impl_->fn = &fn;
  impl_->count = count;
  impl_->next.store(0, std::memory_order_relaxed);
  impl_->active = threads_;
  ++impl_->generation;
  impl_->cv_work.notify_all();
  impl_->cv_done.wait(lk, [&] { return impl_->active == 0; });
  impl_->fn = nullptr;
}

std::vector<double> batch_eval(ThreadPool* pool, const std::vector<VecX>& pts,
                               const std::function<double(const VecX&)>& obj) {
  std::vector<double> out(pts.size(), 0.0);
  if (pool && pool->thread_count() > 1) {
    pool->parallel_for(pts.size(), [&](std::size_t i) { out[i] = obj(pts[i]); });
  } else {
    for (std::size_t i = 0; i < pts.size(); ++i) out[i] = obj(pts[i]);
  }
  return out;
}

}  // namespace fregi
