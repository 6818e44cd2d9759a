#include "skylane/engine/worker_pool.hpp"

#include <algorithm>

#include "skylane/errors.hpp"

namespace skylane {

WorkerPool::WorkerPool(int threads) {
  if (threads < 1) throw ValidationError("threads must be >= 1");
  for (int i = 1; i < threads; ++i) workers_.emplace_back([this, i] { worker(i); });
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  start_.notify_all();
  for (auto& t : workers_) t.join();
}

void WorkerPool::worker(int index) {
  std::uint64_t seen = 0;
  for (;;) {
    const std::function<void(std::size_t)>* job;
    std::size_t n;
    {
      std::unique_lock lock(mu_);
      start_.wait(lock, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      job = job_;
      n = n_;
    }
    for (std::size_t i = static_cast<std::size_t>(index); i < n; i += static_cast<std::size_t>(size())) (*job)(i);
    {
      std::lock_guard lock(mu_);
      if (--pending_ == 0) done_.notify_one();
    }
  }
}

void WorkerPool::parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  if (workers_.empty() || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  {
    std::lock_guard lock(mu_);
    job_ = &fn;
    n_ = n;
    pending_ = static_cast<int>(workers_.size());
    ++generation_;
  }
  start_.notify_all();
  for (std::size_t i = 0; i < n; i += static_cast<std::size_t>(size())) fn(i);
  std::unique_lock lock(mu_);
  done_.wait(lock, [&] { return pending_ == 0; });
}

}  // namespace skylane
