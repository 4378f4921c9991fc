#include "mdl/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace mdl {

namespace {

thread_local bool inside_pool = false;

class Pool {
 public:
  explicit Pool(std::size_t workers) {
    for (std::size_t i = 0; i < workers; ++i) {
      threads_.emplace_back([this] { worker_loop(); });
    }
  }

  ~Pool() {
    {
      std::unique_lock<std::mutex> lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  std::size_t size() const { return threads_.size(); }

  void run(const std::function<void(std::size_t, std::size_t)>& fn,
           std::size_t n, std::size_t chunks) {
    std::atomic<std::size_t> remaining{chunks};
    {
      std::unique_lock<std::mutex> lk(mu_);
      for (std::size_t c = 0; c < chunks; ++c) {
        const std::size_t b = n * c / chunks;
        const std::size_t e = n * (c + 1) / chunks;
        tasks_.push_back([&, b, e] {
          if (b < e) fn(b, e);
          {
            std::lock_guard<std::mutex> done_lk(done_mu_);
            remaining.fetch_sub(1, std::memory_order_acq_rel);
          }
          done_cv_.notify_all();
        });
      }
    }
    cv_.notify_all();
    std::unique_lock<std::mutex> lk(done_mu_);
    done_cv_.wait(lk, [&] { return remaining.load(std::memory_order_acquire) == 0; });
  }

 private:
  void worker_loop() {
    inside_pool = true;
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [this] { return stop_ || !tasks_.empty(); });
        if (stop_ && tasks_.empty()) return;
        task = std::move(tasks_.back());
        tasks_.pop_back();
      }
      task();
    }
  }

  std::mutex mu_;
  std::condition_variable cv_;
  std::mutex done_mu_;
  std::condition_variable done_cv_;
  std::vector<std::function<void()>> tasks_;
  std::vector<std::thread> threads_;
  bool stop_ = false;
};

std::size_t configured_threads() {
  if (const char* env = std::getenv("MDL_THREADS")) {
    const long v = std::atol(env);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

Pool& pool() {
  static Pool p(configured_threads());
  return p;
}

}  // namespace

std::size_t thread_count() { return pool().size(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t workers = pool().size();
  if (workers <= 1 || n == 1 || inside_pool) {
    fn(0, n);
    return;
  }
  const std::size_t chunks = std::min(workers, n);
  pool().run(fn, n, chunks);
}

}  // namespace mdl
