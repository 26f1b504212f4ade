#pragma once

#include <atomic>
#include <cstdint>
#include <limits>
#include <vector>

#include "../range.hpp"
#include "../reclaim.hpp"
#include "../spin.hpp"
#include "../stats.hpp"
#include "list_node.hpp"

namespace rangelock {

/// Conflict policy of the reader-writer lock: with reader preference (the
/// default) a writer that finds an overlapping reader during validation
/// retreats and retries; with writer preference the roles are reversed.
enum class rw_preference : std::uint8_t { reader, writer };

struct snapshot_entry {
  std::uint64_t start;
  std::uint64_t end;
  access mode;
  bool marked;
};

namespace detail {

inline constexpr std::uint64_t kUnboundedBudget = std::numeric_limits<std::uint64_t>::max();

struct exclusive_policy {
  static constexpr bool reader_writer = false;
  static int compare(const list_node& in_list, const list_node& probe) noexcept {
    return compare_exclusive_raw(in_list.start, in_list.end, probe.start, probe.end);
  }
};

struct rw_policy {
  static constexpr bool reader_writer = true;
  static int compare(const list_node& in_list, const list_node& probe) noexcept {
    return compare_rw_raw(in_list.start, in_list.end, in_list.reader, probe.start,
                          probe.end, probe.reader);
  }
};

// Sorted lock-free singly linked list of acquired ranges. Acquisition inserts
// a node at the position given by the range's start address, waiting out any
// overlapping holder; release marks the node's successor word and traversals
// unlink marked nodes as they pass. An empty list is acquired with a single
// CAS that installs a mark-tagged head.
template <class Policy>
class range_list {
 public:
  range_list(epoch_domain& domain, lock_stats* stats, rw_preference pref)
      : domain_(domain), stats_(stats), preference_(pref) {}

  range_list(const range_list&) = delete;
  range_list& operator=(const range_list&) = delete;

  ~range_list() {
    list_node* n = to_node(head_.load(std::memory_order_relaxed));
    while (n != nullptr) {
      list_node* next = to_node(n->succ.load(std::memory_order_relaxed));
      delete n;
      n = next;
    }
  }

  // Returns the owning node, or nullptr once `budget` failure events have
  // been seen (exclusive: restarts caused by a marked predecessor; rw
  // writers: validation conflicts).
  list_node* acquire(std::uint64_t start, std::uint64_t end, bool reader,
                     std::uint64_t budget = kUnboundedBudget) {
    auto& tc = domain_.local();
    std::uint64_t failures = 0;
    for (;;) {
      list_node* n = domain_.allocate(tc);
      n->start = start;
      n->end = end;
      n->reader = reader;
      n->succ.store(0, std::memory_order_relaxed);
      if (stats_) stats_->acquires.fetch_add(1, std::memory_order_relaxed);

      // Fast path: one CAS installs a mark-tagged head when the list is empty.
      word h = head_.load(std::memory_order_acquire);
      if (h == 0) {
        if (stats_) stats_->fast_path_cas.fetch_add(1, std::memory_order_relaxed);
        if (head_.compare_exchange_strong(h, with_mark(to_word(n)),
                                          std::memory_order_acq_rel,
                                          std::memory_order_acquire)) {
          if (stats_) stats_->fast_path_acquires.fetch_add(1, std::memory_order_relaxed);
          return n;
        }
      }

      insert_result r;
      {
        epoch_domain::traversal_guard g(domain_, tc);
        r = insert_node(n, budget, failures, tc);
      }
      switch (r) {
        case insert_result::acquired:
          return n;
        case insert_result::budget_exhausted:
          domain_.put_back(tc, n);  // never published
          return nullptr;
        case insert_result::validation_conflict:
          if (stats_) stats_->writer_retreats.fetch_add(1, std::memory_order_relaxed);
          if (++failures >= budget) return nullptr;  // node already marked; list cleans it up
          break;                                     // retry with a fresh node
      }
    }
  }

  void release(list_node* n) {
    // Fast-path holder: the head still carries our mark-tagged node, so one
    // CAS back to null removes it eagerly.
    const word fast = with_mark(to_word(n));
    if (head_.load(std::memory_order_acquire) == fast) {
      word expected = fast;
      if (stats_) stats_->release_rmw_ops.fetch_add(1, std::memory_order_relaxed);
      if (head_.compare_exchange_strong(expected, 0, std::memory_order_acq_rel,
                                        std::memory_order_acquire)) {
        domain_.retire(domain_.local(), n);
        return;
      }
    }
    RANGELOCK_CONTRACT(!is_marked(n->succ.load(std::memory_order_acquire)),
                       "range released twice");
    n->succ.fetch_add(1, std::memory_order_seq_cst);  // logically mark as deleted
    if (stats_) stats_->release_rmw_ops.fetch_add(1, std::memory_order_relaxed);
  }

  // Full walk ignoring marks. Caller guarantees no concurrent mutators.
  std::vector<snapshot_entry> snapshot() const {
    std::vector<snapshot_entry> out;
    for (list_node* n = to_node(head_.load(std::memory_order_acquire)); n != nullptr;) {
      const word s = n->succ.load(std::memory_order_acquire);
      out.push_back({n->start, n->end, n->reader ? access::reader : access::writer,
                     is_marked(s)});
      n = to_node(s);
    }
    return out;
  }

  epoch_domain& domain() noexcept { return domain_; }
  lock_stats* stats() const noexcept { return stats_; }

 private:
  enum class insert_result { acquired, validation_conflict, budget_exhausted };

  insert_result insert_node(list_node* lock_node, std::uint64_t budget,
                            std::uint64_t& failures, epoch_domain::thread_slot& tc) {
    for (;;) {  // restart from the head
      std::atomic<word>* prev = &head_;
      word cur = prev->load(std::memory_order_acquire);
      for (;;) {
        if (is_marked(cur)) {
          if (prev == &head_) {
            // A fast-path holder tagged the head; strip the mark and proceed
            // with the regular path. The owner still releases via its mark.
            const word cleared = strip_mark(cur);
            if (prev->compare_exchange_weak(cur, cleared, std::memory_order_acq_rel,
                                            std::memory_order_acquire)) {
              cur = cleared;
            }
            continue;
          }
          // The node owning prev is logically deleted; the pointer to the
          // previous position is lost, so restart.
          if (stats_) stats_->restarts.fetch_add(1, std::memory_order_relaxed);
          if constexpr (!Policy::reader_writer) {
            if (++failures >= budget) return insert_result::budget_exhausted;
          }
          break;
        }
        list_node* curp = to_node(cur);
        if (curp != nullptr) {
          if (stats_) stats_->node_visits.fetch_add(1, std::memory_order_relaxed);
          check_not_poisoned(curp);
          const word csucc = curp->succ.load(std::memory_order_acquire);
          if (is_marked(csucc)) {
            // cur is logically deleted: try to remove it from the list and
            // continue traversing either way.
            const word next = strip_mark(csucc);
            word expected = cur;
            if (prev->compare_exchange_strong(expected, next, std::memory_order_acq_rel,
                                              std::memory_order_acquire)) {
              domain_.retire(tc, curp);
              if (stats_) stats_->unlinks.fetch_add(1, std::memory_order_relaxed);
            }
            cur = next;
            continue;
          }
        }
        const int order = curp != nullptr ? Policy::compare(*curp, *lock_node) : 1;
        if (order < 0) {
          // Our range succeeds cur: keep traversing.
          prev = &curp->succ;
          cur = prev->load(std::memory_order_acquire);
        } else if (order == 0) {
          // Overlap: wait until cur marks itself as deleted, then resume from
          // the same point (the next iteration unlinks it).
          if (stats_) stats_->wait_loops.fetch_add(1, std::memory_order_relaxed);
          spin_wait w;
          while (!is_marked(curp->succ.load(std::memory_order_acquire))) w.pause();
        } else {
          // Our range precedes cur (or cur is the end of the list): insert.
          lock_node->succ.store(cur, std::memory_order_relaxed);
          word expected = cur;
          if (prev->compare_exchange_strong(expected, to_word(lock_node),
                                            std::memory_order_acq_rel,
                                            std::memory_order_acquire)) {
            if constexpr (Policy::reader_writer) {
              const bool ok = lock_node->reader ? validate_reader(lock_node, tc)
                                                : validate_writer(lock_node, tc);
              return ok ? insert_result::acquired : insert_result::validation_conflict;
            } else {
              return insert_result::acquired;
            }
          }
          cur = expected;  // lost the race on this link: re-examine its new value
        }
      }
    }
  }

  // Reader validation: scan forward from our node until the first node that
  // starts past our end. Overlapping writers are waited out under reader
  // preference; under writer preference the reader retreats instead.
  bool validate_reader(list_node* lock_node, epoch_domain::thread_slot& tc) {
    std::atomic<word>* prev = &lock_node->succ;
    list_node* cur = to_node(prev->load(std::memory_order_acquire));
    for (;;) {
      if (cur == nullptr) return true;
      check_not_poisoned(cur);
      if (cur->start > lock_node->end) return true;
      const word csucc = cur->succ.load(std::memory_order_acquire);
      if (is_marked(csucc)) {
        const word next = strip_mark(csucc);
        word expected = to_word(cur);
        if (prev->compare_exchange_strong(expected, next, std::memory_order_acq_rel,
                                          std::memory_order_acquire)) {
          domain_.retire(tc, cur);
          if (stats_) stats_->unlinks.fetch_add(1, std::memory_order_relaxed);
        }
        cur = to_node(next);
      } else if (cur->reader) {
        prev = &cur->succ;
        cur = to_node(prev->load(std::memory_order_acquire));
      } else if (preference_ == rw_preference::reader) {
        // Overlapping writer: wait until it marks itself as deleted.
        if (stats_) stats_->wait_loops.fetch_add(1, std::memory_order_relaxed);
        spin_wait w;
        while (!is_marked(cur->succ.load(std::memory_order_acquire))) w.pause();
      } else {
        mark_deleted(lock_node);
        return false;
      }
    }
  }

  // Writer validation: re-scan from the head until we reach our own node. Any
  // unmarked node not wholly before us is a conflict (necessarily a reader:
  // writers were waited for before insertion).
  bool validate_writer(list_node* lock_node, epoch_domain::thread_slot& tc) {
    std::atomic<word>* prev = &head_;
    list_node* cur = to_node(prev->load(std::memory_order_acquire));
    for (;;) {
      if (cur == lock_node) return true;
      if (cur == nullptr) {
        RANGELOCK_CONTRACT(false, "writer validation lost its own node");
        mark_deleted(lock_node);
        return false;
      }
      check_not_poisoned(cur);
      const word csucc = cur->succ.load(std::memory_order_acquire);
      if (is_marked(csucc)) {
        const word next = strip_mark(csucc);
        word expected = to_word(cur);
        if (prev->compare_exchange_strong(expected, next, std::memory_order_acq_rel,
                                          std::memory_order_acquire)) {
          domain_.retire(tc, cur);
          if (stats_) stats_->unlinks.fetch_add(1, std::memory_order_relaxed);
        }
        cur = to_node(next);
      } else if (cur->end <= lock_node->start) {
        prev = &cur->succ;
        cur = to_node(prev->load(std::memory_order_acquire));
      } else if (preference_ == rw_preference::reader) {
        // Conflict with a reader: delete our node and fail the validation.
        mark_deleted(lock_node);
        return false;
      } else {
        if (stats_) stats_->wait_loops.fetch_add(1, std::memory_order_relaxed);
        spin_wait w;
        while (!is_marked(cur->succ.load(std::memory_order_acquire))) w.pause();
      }
    }
  }

  static void mark_deleted(list_node* n) {
    n->succ.fetch_add(1, std::memory_order_seq_cst);
  }

  std::atomic<word> head_{0};
  epoch_domain& domain_;
  lock_stats* stats_;
  rw_preference preference_;
};

}  // namespace detail
}  // namespace rangelock
