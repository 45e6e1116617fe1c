#pragma once

#include <condition_variable>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace gns {

/// Fixed-size worker pool for fanning out independent per-interval or
/// per-sample jobs. Jobs must write to disjoint data; results are then
/// bit-identical to a serial run regardless of scheduling.
class ThreadPool {
 public:
  /// n_threads <= 1 keeps everything on the calling thread.
  explicit ThreadPool(int n_threads);
  ~ThreadPool();

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int size() const { return static_cast<int>(workers_.size()) + 1; }

  /// Runs fn(0) .. fn(count-1), blocking until all complete. If any job
  /// throws, rethrows the exception of the lowest job index.
  void run_indexed(int count, const std::function<void(int)>& fn);

  /// Threads requested via `n`, falling back to the hardware concurrency
  /// when n <= 0.
  static int resolve_thread_count(int n);

 private:
  struct Task {
    std::function<void()> fn;
  };

  void worker_loop();

  std::vector<std::thread> workers_;
  std::vector<Task> queue_;
  std::size_t next_task_ = 0;
  std::size_t open_tasks_ = 0;
  bool stop_ = false;
  std::mutex mutex_;
  std::condition_variable task_ready_;
  std::condition_variable batch_done_;
};

}  // namespace gns
