#pragma once

#include <algorithm>
#include <condition_variable>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace dualdomain {

/// Persistent worker pool. Work is split into contiguous chunks with a fixed
/// partition, so results are independent of scheduling as long as chunks
/// write disjoint outputs. DUALDOMAIN_NUM_THREADS caps the worker count.
class ThreadPool {
public:
  explicit ThreadPool(unsigned threads) { start(threads); }

  ~ThreadPool() {
    {
      std::unique_lock lock(mutex_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  unsigned size() const { return static_cast<unsigned>(workers_.size()) + 1; }

  /// Runs fn(begin, end) over [0, n) split into size() contiguous chunks.
  /// The calling thread takes the first chunk.
  void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    const int64_t parts = std::min<int64_t>(size(), n);
    if (parts == 1) {
      fn(0, n);
      return;
    }
    {
      std::unique_lock lock(mutex_);
      job_ = &fn;
      job_n_ = n;
      job_parts_ = parts;
      next_part_ = 1; // part 0 runs inline
      pending_ = parts - 1;
      ++generation_;
    }
    cv_.notify_all();
    run_part(fn, 0, n, parts, 0);
    std::unique_lock lock(mutex_);
    done_cv_.wait(lock, [&] { return pending_ == 0; });
    job_ = nullptr;
  }

  static unsigned env_thread_cap() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("DUALDOMAIN_NUM_THREADS")) {
      const long v = std::strtol(env, nullptr, 10);
      if (v >= 1) hw = std::min(hw, static_cast<unsigned>(v));
    }
    return hw;
  }

  static ThreadPool& global() {
    static ThreadPool pool(env_thread_cap());
    return pool;
  }

private:
  void start(unsigned threads) {
    const unsigned extra = threads > 0 ? threads - 1 : 0;
    for (unsigned i = 0; i < extra; ++i) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  static void run_part(const std::function<void(int64_t, int64_t)>& fn,
                       int64_t part, int64_t n, int64_t parts, int64_t) {
    const int64_t chunk = (n + parts - 1) / parts;
    const int64_t b = part * chunk;
    const int64_t e = std::min(n, b + chunk);
    if (b < e) fn(b, e);
  }

  void worker_loop() {
    uint64_t seen = 0;
    for (;;) {
      const std::function<void(int64_t, int64_t)>* fn = nullptr;
      int64_t part = -1, n = 0, parts = 0;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] {
          return stop_ || (job_ && generation_ != seen && next_part_ < job_parts_);
        });
        if (stop_) return;
        seen = generation_;
        fn = job_;
        n = job_n_;
        parts = job_parts_;
        part = next_part_++;
      }
      run_part(*fn, part, n, parts, 0);
      bool last = false;
      {
        std::unique_lock lock(mutex_);
        last = --pending_ == 0;
        // more parts than workers: keep pulling within the same generation
        if (!last && next_part_ < parts) {
          seen = generation_ - 1; // re-enter wait predicate immediately
        }
      }
      if (last) done_cv_.notify_all();
    }
  }

  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(int64_t, int64_t)>* job_ = nullptr;
  int64_t job_n_ = 0;
  int64_t job_parts_ = 0;
  int64_t next_part_ = 0;
  int64_t pending_ = 0;
  uint64_t generation_ = 0;
  bool stop_ = false;
};

/// parallel_for over the global pool.
inline void parallel_for(int64_t n,
                         const std::function<void(int64_t, int64_t)>& fn) {
  ThreadPool::global().parallel_for(n, fn);
}

} // namespace dualdomain
