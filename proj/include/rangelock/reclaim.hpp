#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <unordered_set>
#include <utility>
#include <vector>

#include "contract.hpp"
#include "detail/list_node.hpp"
#include "spin.hpp"

namespace rangelock {

/// Epoch-based deferred reuse of lock-list nodes.
///
/// Every participating thread owns an epoch counter (even = quiescent, odd =
/// inside a list traversal) and two private node pools: `active` holds nodes
/// ready to hand out, `reclaimed` holds nodes this thread unlinked from some
/// list but must not reuse yet. When the active pool runs dry, the thread
/// waits out every other thread whose epoch is odd, swaps its pools, and
/// rebalances the active pool towards the target size N. In a balanced
/// workload this never touches the system allocator after warm-up.
///
/// A small generic deferred-free channel rides on the same epochs for objects
/// that are not lock-list nodes (the skip list uses it for removed nodes).
class epoch_domain {
 public:
  struct thread_slot {
    std::atomic<std::uint64_t> epoch{0};
    std::atomic<bool> in_use{false};
    thread_slot* next = nullptr;  // registry chain, grow-only

    // Owner-private state below.
    detail::list_node* active_head = nullptr;
    std::size_t active_count = 0;
    detail::list_node* reclaimed_head = nullptr;
    std::size_t reclaimed_count = 0;

    struct deferred_item {
      void* ptr;
      void (*destroy)(void*);
    };
    std::vector<deferred_item> deferred;
  };

  struct pool_sizes {
    std::size_t active;
    std::size_t reclaimed;
  };

  explicit epoch_domain(std::uint32_t pool_target = 128)
      : pool_target_(pool_target == 0 ? 1 : pool_target), id_(next_domain_id()) {
    std::lock_guard<std::mutex> lk(live_mutex());
    live_ids_unlocked().insert(id_);
  }

  epoch_domain(const epoch_domain&) = delete;
  epoch_domain& operator=(const epoch_domain&) = delete;

  ~epoch_domain() {
    {
      std::lock_guard<std::mutex> lk(live_mutex());
      live_ids_unlocked().erase(id_);
    }
    thread_slot* s = registry_head_.load(std::memory_order_acquire);
    while (s != nullptr) {
      free_pool(s->active_head);
      free_pool(s->reclaimed_head);
      for (auto& d : s->deferred) d.destroy(d.ptr);
      thread_slot* next = s->next;
      delete s;
      s = next;
    }
  }

  static epoch_domain& global() {
    static epoch_domain d;
    return d;
  }

  std::uint32_t pool_target() const noexcept { return pool_target_; }

  /// Slot of the calling thread, registering it on first use. The slot is
  /// returned to the domain (pools drained) when the thread exits. Entries are
  /// keyed by a unique domain id, so a new domain constructed at a recycled
  /// address never matches a stale cache entry.
  thread_slot& local() {
    struct entry {
      epoch_domain* domain;
      std::uint64_t id;
      thread_slot* slot;
    };
    struct tls_cache {
      std::vector<entry> entries;
      ~tls_cache() {
        for (auto& e : entries) leave_if_live(e.domain, e.id, e.slot);
      }
    };
    thread_local tls_cache cache;
    for (auto& e : cache.entries) {
      if (e.domain == this && e.id == id_) return *e.slot;
    }
    thread_slot* s = join();
    std::erase_if(cache.entries, [&](const entry& e) { return e.domain == this; });
    cache.entries.push_back({this, id_, s});
    return *s;
  }

  // --- epoch bracket -------------------------------------------------------

  void enter_traversal(thread_slot& t) {
    RANGELOCK_CONTRACT((t.epoch.load(std::memory_order_relaxed) & 1) == 0,
                       "nested traversal bracket");
    t.epoch.fetch_add(1, std::memory_order_seq_cst);
  }

  void exit_traversal(thread_slot& t) {
    RANGELOCK_CONTRACT((t.epoch.load(std::memory_order_relaxed) & 1) == 1,
                       "unbalanced traversal exit");
    t.epoch.fetch_add(1, std::memory_order_seq_cst);
  }

  class traversal_guard {
   public:
    traversal_guard(epoch_domain& d, thread_slot& t) : domain_(d), slot_(t) {
      domain_.enter_traversal(slot_);
    }
    ~traversal_guard() { domain_.exit_traversal(slot_); }
    traversal_guard(const traversal_guard&) = delete;
    traversal_guard& operator=(const traversal_guard&) = delete;

   private:
    epoch_domain& domain_;
    thread_slot& slot_;
  };

  // --- node pools ----------------------------------------------------------

  detail::list_node* allocate(thread_slot& t) {
    if (t.active_count == 0) {
      barrier(t);
      std::swap(t.active_head, t.reclaimed_head);
      std::swap(t.active_count, t.reclaimed_count);
#ifndef NDEBUG
      for (detail::list_node* n = t.active_head; n != nullptr; n = n->pool_next) {
        n->start = detail::kPoison;
        n->end = detail::kPoison;
        n->succ.store(detail::kMarkBit, std::memory_order_relaxed);
      }
#endif
      drain_deferred(t);
      rebalance(t);
    }
    detail::list_node* n = t.active_head;
    t.active_head = n->pool_next;
    --t.active_count;
    n->pool_next = nullptr;
#ifndef NDEBUG
    n->retired.store(false, std::memory_order_relaxed);
#endif
    return n;
  }

  /// Return a node that was allocated but never published to any list.
  void put_back(thread_slot& t, detail::list_node* n) {
    n->pool_next = t.active_head;
    t.active_head = n;
    ++t.active_count;
  }

  /// Defer reuse of a node unlinked from a lock list. Only the thread whose
  /// CAS removed the node may retire it.
  void retire(thread_slot& t, detail::list_node* n) {
#ifndef NDEBUG
    RANGELOCK_CONTRACT(!n->retired.exchange(true, std::memory_order_relaxed),
                       "node retired twice");
#endif
    n->pool_next = t.reclaimed_head;
    t.reclaimed_head = n;
    ++t.reclaimed_count;
  }

  void defer_free(thread_slot& t, void* p, void (*destroy)(void*)) {
    t.deferred.push_back({p, destroy});
    if (t.deferred.size() >= kDeferredBatch) {
      barrier(t);
      drain_deferred(t);
    }
  }

  /// Wait until no other registered thread is inside a traversal that began
  /// before this call.
  void barrier(thread_slot& self) {
    RANGELOCK_CONTRACT((self.epoch.load(std::memory_order_relaxed) & 1) == 0,
                       "barrier inside a traversal bracket");
    for (thread_slot* s = registry_head_.load(std::memory_order_acquire); s != nullptr;
         s = s->next) {
      if (s == &self || !s->in_use.load(std::memory_order_acquire)) continue;
      const std::uint64_t e = s->epoch.load(std::memory_order_seq_cst);
      if ((e & 1) == 0) continue;
      spin_wait w;
      while (s->epoch.load(std::memory_order_seq_cst) == e) w.pause();
    }
  }

  // --- introspection (tests, instrumentation) ------------------------------

  std::uint64_t system_allocations() const noexcept {
    return system_allocations_.load(std::memory_order_relaxed);
  }
  std::uint64_t system_frees() const noexcept {
    return system_frees_.load(std::memory_order_relaxed);
  }
  pool_sizes sizes(const thread_slot& t) const noexcept {
    return {t.active_count, t.reclaimed_count};
  }
  static std::uint64_t epoch_of(const thread_slot& t) noexcept {
    return t.epoch.load(std::memory_order_seq_cst);
  }

 private:
  static constexpr std::size_t kDeferredBatch = 64;

  thread_slot* join() {
    std::lock_guard<std::mutex> lk(join_mutex_);
    for (thread_slot* s = registry_head_.load(std::memory_order_acquire); s != nullptr;
         s = s->next) {
      bool expected = false;
      if (!s->in_use.load(std::memory_order_relaxed) &&
          s->in_use.compare_exchange_strong(expected, true, std::memory_order_acq_rel)) {
        // A slot is only handed back quiescent, so the new owner's epoch can
        // start from zero again.
        s->epoch.store(0, std::memory_order_seq_cst);
        refill(*s);
        return s;
      }
    }
    auto* s = new thread_slot();
    refill(*s);
    s->in_use.store(true, std::memory_order_release);
    s->next = registry_head_.load(std::memory_order_relaxed);
    registry_head_.store(s, std::memory_order_release);
    return s;
  }

  void leave(thread_slot* s) {
    barrier(*s);
    drain_deferred(*s);
    free_pool(s->active_head);
    free_pool(s->reclaimed_head);
    s->active_head = nullptr;
    s->active_count = 0;
    s->reclaimed_head = nullptr;
    s->reclaimed_count = 0;
    s->in_use.store(false, std::memory_order_release);
  }

  static void leave_if_live(epoch_domain* d, std::uint64_t id, thread_slot* s) {
    std::lock_guard<std::mutex> lk(live_mutex());
    if (live_ids_unlocked().count(id) != 0) d->leave(s);
  }

  void refill(thread_slot& t) {
    while (t.active_count < pool_target_) {
      auto* n = new detail::list_node();
      system_allocations_.fetch_add(1, std::memory_order_relaxed);
      n->pool_next = t.active_head;
      t.active_head = n;
      ++t.active_count;
    }
  }

  void rebalance(thread_slot& t) {
    if (t.active_count < pool_target_ / 2 || t.active_count == 0) {
      refill(t);
    } else if (t.active_count > 2 * static_cast<std::size_t>(pool_target_)) {
      while (t.active_count > pool_target_) {
        detail::list_node* n = t.active_head;
        t.active_head = n->pool_next;
        --t.active_count;
        delete n;
        system_frees_.fetch_add(1, std::memory_order_relaxed);
      }
    }
  }

  void drain_deferred(thread_slot& t) {
    for (auto& d : t.deferred) d.destroy(d.ptr);
    t.deferred.clear();
  }

  static void free_pool(detail::list_node* head) {
    while (head != nullptr) {
      detail::list_node* next = head->pool_next;
      delete head;
      head = next;
    }
  }

  static std::mutex& live_mutex() {
    static std::mutex m;
    return m;
  }
  static std::unordered_set<std::uint64_t>& live_ids_unlocked() {
    static std::unordered_set<std::uint64_t> s;
    return s;
  }
  static std::uint64_t next_domain_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
  }

  const std::uint32_t pool_target_;
  const std::uint64_t id_;
  std::atomic<thread_slot*> registry_head_{nullptr};
  std::mutex join_mutex_;
  std::atomic<std::uint64_t> system_allocations_{0};
  std::atomic<std::uint64_t> system_frees_{0};
};

}  // namespace rangelock
