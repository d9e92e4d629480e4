#pragma once

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <exception>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace corrisk {

/// Runs f(item) for item in [0, count) on up to `threads` workers.  Items
/// must write only to their own output slots; callers reduce those slots in
/// index order, which keeps results independent of the worker count.
template <class F>
void parallel_for(std::size_t count, unsigned threads, F&& f) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), count);
  if (workers <= 1) {
    for (std::size_t k = 0; k < count; ++k) f(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= count) return;
      try {
        f(k);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

/// Streaming mean/variance for a fixed number of components (Welford, with
/// Chan's pairwise merge).
class RunningStats {
 public:
  RunningStats() = default;
  explicit RunningStats(std::size_t dim) : mean_(dim, 0.0), m2_(dim, 0.0) {}

  std::size_t dim() const noexcept { return mean_.size(); }
  std::size_t count() const noexcept { return count_; }

  void add(std::span<const double> x) {
    assert(x.size() == dim());
    ++count_;
    const double inv = 1.0 / static_cast<double>(count_);
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double delta = x[k] - mean_[k];
      mean_[k] += delta * inv;
      m2_[k] += delta * (x[k] - mean_[k]);
    }
  }
  void add(double x) { add(std::span<const double>(&x, 1)); }

  void merge(const RunningStats& o) {
    assert(o.dim() == dim());
    if (o.count_ == 0) return;
    if (count_ == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(count_);
    const double nb = static_cast<double>(o.count_);
    const double n = na + nb;
    for (std::size_t k = 0; k < dim(); ++k) {
      const double delta = o.mean_[k] - mean_[k];
      mean_[k] += delta * nb / n;
      m2_[k] += o.m2_[k] + delta * delta * na * nb / n;
    }
    count_ += o.count_;
  }

  double mean(std::size_t k = 0) const { return mean_[k]; }
  std::span<const double> means() const noexcept { return mean_; }

  /// Sample variance (n - 1 denominator); zero below two observations.
  double variance(std::size_t k = 0) const {
    return count_ < 2 ? 0.0 : std::max(0.0, m2_[k]) / static_cast<double>(count_ - 1);
  }
  double standard_error(std::size_t k = 0) const {
    return count_ < 2 ? 0.0 : std::sqrt(variance(k) / static_cast<double>(count_));
  }

 private:
  std::size_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

}  // namespace corrisk
