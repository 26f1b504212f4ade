#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <stdexcept>

#include "range.hpp"
#include "spin.hpp"

namespace rangelock {

/// Test-and-test-and-set spin mutex guarding the baseline range tree.
class ttas_spinlock {
 public:
  void lock() {
    spin_wait w;
    for (;;) {
      while (locked_.load(std::memory_order_relaxed)) w.pause();
      if (!locked_.exchange(true, std::memory_order_acquire)) return;
    }
  }

  void unlock() { locked_.store(false, std::memory_order_release); }

 private:
  std::atomic<bool> locked_{false};
};

enum class tree_lock_policy : std::uint8_t { exclusive_only, reader_writer };

/// Kernel-style baseline: an ordered index of pending and held ranges under a
/// spin lock. A newcomer counts the earlier ranges that block it, inserts its
/// node, and spins guard-free until its count drops to zero; release removes
/// the node and decrements the count of every later range it was blocking.
/// Grants are FIFO over the insertion order, which intentionally limits
/// concurrency (a request queues behind an earlier blocked request even when
/// their ranges are disjoint).
template <tree_lock_policy Policy>
class tree_range_lock {
 public:
  struct node {
    std::uint64_t start;
    std::uint64_t end;
    bool reader;
    std::uint64_t order;  // insertion sequence
    std::atomic<std::uint32_t> blockers{0};
  };

  class handle {
   public:
    handle() = default;
    handle(handle&& o) noexcept : node_(std::exchange(o.node_, nullptr)) {}
    handle& operator=(handle&& o) noexcept {
      node_ = std::exchange(o.node_, nullptr);
      return *this;
    }
    handle(const handle&) = delete;
    handle& operator=(const handle&) = delete;
    bool valid() const noexcept { return node_ != nullptr; }

   private:
    explicit handle(node* n) noexcept : node_(n) {}
    node* node_ = nullptr;
    friend class tree_range_lock;
  };

  tree_range_lock() = default;
  tree_range_lock(const tree_range_lock&) = delete;
  tree_range_lock& operator=(const tree_range_lock&) = delete;

  ~tree_range_lock() {
    for (auto& [start, n] : index_) delete n;
  }

  handle acquire(std::uint64_t start, std::uint64_t end, access mode = access::writer) {
    if (start >= end) throw std::invalid_argument("range lock: require start < end");
    auto* n = new node{start, end, mode == access::reader, 0};

    guard_.lock();
    n->order = next_order_++;
    std::uint32_t count = 0;
    for (auto it = index_.begin(); it != index_.end() && it->first < end; ++it) {
      if (blocks(*it->second, *n)) ++count;
    }
    n->blockers.store(count, std::memory_order_relaxed);
    index_.emplace(start, n);
    guard_.unlock();

    spin_wait w;
    while (n->blockers.load(std::memory_order_acquire) != 0) w.pause();
    return handle{n};
  }

  void release(handle& h) {
    node* n = std::exchange(h.node_, nullptr);
    guard_.lock();
    auto [lo, hi] = index_.equal_range(n->start);
    for (auto it = lo; it != hi; ++it) {
      if (it->second == n) {
        index_.erase(it);
        break;
      }
    }
    // Unblock every later-arrived range this node was counted against.
    for (auto it = index_.begin(); it != index_.end() && it->first < n->end; ++it) {
      node* other = it->second;
      if (other->order > n->order && blocks(*n, *other)) {
        other->blockers.fetch_sub(1, std::memory_order_release);
      }
    }
    guard_.unlock();
    delete n;
  }

  std::size_t size() const {
    const_cast<ttas_spinlock&>(guard_).lock();
    const std::size_t s = index_.size();
    const_cast<ttas_spinlock&>(guard_).unlock();
    return s;
  }

 private:
  // Does `earlier` block `later`? Overlap is required; under reader-writer
  // semantics two readers never block each other.
  static bool blocks(const node& earlier, const node& later) noexcept {
    if (earlier.end <= later.start || later.end <= earlier.start) return false;
    if constexpr (Policy == tree_lock_policy::reader_writer) {
      if (earlier.reader && later.reader) return false;
    }
    return true;
  }

  ttas_spinlock guard_;
  std::multimap<std::uint64_t, node*> index_;
  std::uint64_t next_order_ = 0;
};

using lustre_range_lock = tree_range_lock<tree_lock_policy::exclusive_only>;
using kernel_rw_range_lock = tree_range_lock<tree_lock_policy::reader_writer>;

}  // namespace rangelock
