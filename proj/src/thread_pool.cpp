#include "gns/thread_pool.hpp"

#include <algorithm>

namespace gns {

ThreadPool::ThreadPool(int n_threads) {
  const int extra = std::max(0, n_threads - 1);
  workers_.reserve(extra);
  for (int i = 0; i < extra; ++i) workers_.emplace_back([this] { worker_loop(); });
}

ThreadPool::~ThreadPool() {
  {
    std::lock_guard lock(mutex_);
    stop_ = true;
  }
  task_ready_.notify_all();
  for (std::thread& w : workers_) w.join();
}

int ThreadPool::resolve_thread_count(int n) {
  if (n > 0) return n;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void ThreadPool::worker_loop() {
  for (;;) {
    std::function<void()> task;
    {
      std::unique_lock lock(mutex_);
      task_ready_.wait(lock, [this] { return stop_ || next_task_ < queue_.size(); });
      if (next_task_ >= queue_.size()) {
        if (stop_) return;
        continue;
      }
      task = std::move(queue_[next_task_++].fn);
    }
    task();
    {
      std::lock_guard lock(mutex_);
      if (--open_tasks_ == 0) batch_done_.notify_all();
    }
  }
}

void ThreadPool::run_indexed(int count, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  if (workers_.empty() || count == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }

  std::vector<std::exception_ptr> errors(count);
  {
    std::lock_guard lock(mutex_);
    for (int i = 0; i < count; ++i) {
      queue_.push_back(Task{[&fn, &errors, i] {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }});
    }
    open_tasks_ += static_cast<std::size_t>(count);
  }
  task_ready_.notify_all();

  // The calling thread drains tasks alongside the workers.
  for (;;) {
    std::function<void()> task;
    {
      std::lock_guard lock(mutex_);
      if (next_task_ >= queue_.size()) break;
      task = std::move(queue_[next_task_++].fn);
    }
    task();
    {
      std::lock_guard lock(mutex_);
      if (--open_tasks_ == 0) batch_done_.notify_all();
    }
  }
  {
    std::unique_lock lock(mutex_);
    batch_done_.wait(lock, [this] { return open_tasks_ == 0; });
    queue_.clear();
    next_task_ = 0;
  }
  // Errors are surfaced in job order so failures are deterministic.
  for (std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace gns
