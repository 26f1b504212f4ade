#pragma once

#include <atomic>
#include <cstdint>
#include <limits>
#include <utility>

#include "range.hpp"
#include "spin.hpp"

namespace rangelock {

/// FIFO ticket-based reader-writer mutex. Arrivals are admitted strictly in
/// ticket order, so no waiter can be bypassed: consecutive readers run
/// concurrently, a writer waits for every earlier arrival to complete.
class ticket_rw_mutex {
 public:
  void lock_shared() {
    const std::uint32_t me = arrivals_.fetch_add(1, std::memory_order_acq_rel);
    spin_wait w;
    while (admitted_.load(std::memory_order_acquire) != me) w.pause();
    admitted_.fetch_add(1, std::memory_order_acq_rel);  // pass the baton onward
  }

  void unlock_shared() { completed_.fetch_add(1, std::memory_order_acq_rel); }

  void lock() {
    const std::uint32_t me = arrivals_.fetch_add(1, std::memory_order_acq_rel);
    spin_wait w;
    while (completed_.load(std::memory_order_acquire) != me) w.pause();
  }

  void unlock() {
    admitted_.fetch_add(1, std::memory_order_acq_rel);
    completed_.fetch_add(1, std::memory_order_acq_rel);
  }

 private:
  std::atomic<std::uint32_t> arrivals_{0};   // next ticket to hand out
  std::atomic<std::uint32_t> admitted_{0};   // tickets allowed past the gate
  std::atomic<std::uint32_t> completed_{0};  // tickets whose holders finished
};

inline constexpr std::uint32_t kNeverEscalate = std::numeric_limits<std::uint32_t>::max();

/// Starvation-avoidance wrapper: an impatient counter plus an auxiliary fair
/// reader-writer gate. The common case (counter zero) costs one relaxed read.
/// A thread that fails `patience` acquisition attempts bumps the counter,
/// takes the gate for write, and completes its range acquisition unopposed by
/// new entrants; everyone else passes through the gate in read mode while the
/// counter is nonzero.
template <class Lock>
class fair_range_lock {
 public:
  using handle = typename Lock::handle;

  template <class... Args>
  explicit fair_range_lock(std::uint32_t patience, Args&&... args)
      : patience_(patience), lock_(std::forward<Args>(args)...) {}

  handle acquire(std::uint64_t start, std::uint64_t end, access mode = access::writer) {
    if (patience_ == kNeverEscalate) return lock_.acquire(start, end, mode);

    if (impatient_.load(std::memory_order_relaxed) == 0) {
      if (auto h = lock_.try_acquire(start, end, mode, patience_)) return std::move(*h);
    } else {
      gate_.lock_shared();
      auto h = lock_.try_acquire(start, end, mode, patience_);
      gate_.unlock_shared();
      if (h) return std::move(*h);
    }

    impatient_.fetch_add(1, std::memory_order_acq_rel);
    gate_.lock();
    handle h = lock_.acquire(start, end, mode);
    gate_.unlock();
    impatient_.fetch_sub(1, std::memory_order_acq_rel);
    return h;
  }

  void release(handle& h) { lock_.release(h); }

  std::uint32_t patience() const noexcept { return patience_; }
  std::uint64_t impatient() const noexcept {
    return impatient_.load(std::memory_order_relaxed);
  }
  Lock& inner() noexcept { return lock_; }

 private:
  const std::uint32_t patience_;
  std::atomic<std::uint64_t> impatient_{0};
  ticket_rw_mutex gate_;
  Lock lock_;
};

}  // namespace rangelock
