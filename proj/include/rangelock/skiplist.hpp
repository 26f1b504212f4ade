#pragma once

#include <atomic>
#include <bit>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <vector>

#include "list_lock.hpp"
#include "range.hpp"
#include "reclaim.hpp"
#include "spin.hpp"

namespace rangelock {

/// Concurrent ordered set: an optimistic skip list whose per-node locks are
/// replaced by one exclusive range lock over the key space. Searches are
/// wait-free and acquire no locks. An update acquires a single range
/// stretching from the key of the predecessor at the node's top level to the
/// target key: [predKey, key+1) for inserts, [predKey, key+2) for removes
/// (the extra key fences off inserts that would update pointers in the
/// to-be-deleted node). The head sentinel carries the key-space minimum so it
/// participates in range computation.
template <class RangeLock = list_range_lock>
class range_locked_skiplist {
 public:
  static constexpr int kMaxLevel = 20;
  static constexpr std::uint64_t kMaxKey = std::numeric_limits<std::uint64_t>::max() - 2;

  template <class... LockArgs>
  explicit range_locked_skiplist(epoch_domain& domain, LockArgs&&... lock_args)
      : domain_(&domain),
        key_lock_(std::forward<LockArgs>(lock_args)...),
        head_(make_node(0, kMaxLevel - 1)) {
    head_->fully_linked.store(true, std::memory_order_relaxed);
  }

  range_locked_skiplist() : range_locked_skiplist(epoch_domain::global()) {}

  range_locked_skiplist(const range_locked_skiplist&) = delete;
  range_locked_skiplist& operator=(const range_locked_skiplist&) = delete;

  ~range_locked_skiplist() {
    node* n = head_;
    while (n != nullptr) {
      node* next = n->next[0].load(std::memory_order_relaxed);
      delete n;
      n = next;
    }
  }

  bool contains(std::uint64_t key) const {
    auto& tc = domain_->local();
    epoch_domain::traversal_guard g(*domain_, tc);
    node* pred = head_;
    node* cur = nullptr;
    for (int level = kMaxLevel - 1; level >= 0; --level) {
      cur = pred->next[level].load(std::memory_order_acquire);
      while (cur != nullptr && cur->key < key) {
        pred = cur;
        cur = pred->next[level].load(std::memory_order_acquire);
      }
      if (cur != nullptr && cur->key == key) break;
    }
    return cur != nullptr && cur->key == key &&
           cur->fully_linked.load(std::memory_order_acquire) &&
           !cur->removed.load(std::memory_order_acquire);
  }

  bool insert(std::uint64_t key) {
    check_key(key);
    const int top = random_level();
    node* preds[kMaxLevel];
    node* succs[kMaxLevel];
    spin_wait waiter;
    for (;;) {
      std::uint64_t pred_key;
      {
        auto& tc = domain_->local();
        epoch_domain::traversal_guard g(*domain_, tc);
        const int found = search(key, preds, succs);
        if (found >= 0) {
          node* f = succs[found];
          if (!f->removed.load(std::memory_order_acquire)) {
            // An in-progress insert of the same key wins; wait until it is
            // fully linked so the failed answer is final.
            while (!f->fully_linked.load(std::memory_order_acquire)) waiter.pause();
            return false;
          }
          continue;  // being removed: retry the search
        }
        pred_key = preds[top]->key;
      }

      auto h = key_lock_.acquire(pred_key, key + 1, access::writer);
      bool inserted = false;
      bool duplicate = false;
      {
        auto& tc = domain_->local();
        epoch_domain::traversal_guard g(*domain_, tc);
        // Re-run the search under the lock: the locked range freezes all
        // structural changes between the top-level predecessor and the key,
        // so a fresh result with the same predecessor key is authoritative.
        const int found = search(key, preds, succs);
        if (found >= 0) {
          duplicate = true;
        } else if (preds[top]->key == pred_key) {
          node* n = make_node(key, top);
          for (int i = 0; i <= top; ++i) {
            n->next[i].store(succs[i], std::memory_order_relaxed);
          }
          for (int i = 0; i <= top; ++i) {
            preds[i]->next[i].store(n, std::memory_order_release);
          }
          n->fully_linked.store(true, std::memory_order_release);
          inserted = true;
        }
      }
      key_lock_.release(h);
      if (inserted) return true;
      if (duplicate) return false;
      // The predecessor moved while we were unlocked: retry from the search.
    }
  }

  bool remove(std::uint64_t key) {
    check_key(key);
    node* preds[kMaxLevel];
    node* succs[kMaxLevel];
    for (;;) {
      std::uint64_t pred_key;
      {
        auto& tc = domain_->local();
        epoch_domain::traversal_guard g(*domain_, tc);
        const int found = search(key, preds, succs);
        if (found < 0) return false;
        node* victim = succs[found];
        if (victim->removed.load(std::memory_order_acquire)) return false;
        if (!victim->fully_linked.load(std::memory_order_acquire) ||
            victim->top_level != found) {
          return false;  // not a complete node yet; the insert wins
        }
        pred_key = preds[victim->top_level]->key;
      }

      auto h = key_lock_.acquire(pred_key, key + 2, access::writer);
      node* unlinked = nullptr;
      bool absent = false;
      {
        auto& tc = domain_->local();
        epoch_domain::traversal_guard g(*domain_, tc);
        const int found = search(key, preds, succs);
        if (found < 0) {
          absent = true;
        } else {
          node* victim = succs[found];
          if (victim->removed.load(std::memory_order_acquire)) {
            absent = true;
          } else if (victim->top_level == found && preds[found]->key == pred_key) {
            victim->removed.store(true, std::memory_order_release);
            for (int i = found; i >= 0; --i) {
              preds[i]->next[i].store(victim->next[i].load(std::memory_order_relaxed),
                                      std::memory_order_release);
            }
            unlinked = victim;
          }
          // otherwise the neighborhood changed: retry with a fresh range
        }
      }
      key_lock_.release(h);
      if (unlinked != nullptr) {
        auto& tc = domain_->local();
        domain_->defer_free(tc, unlinked,
                            +[](void* p) { delete static_cast<node*>(p); });
        return true;
      }
      if (absent) return false;
      // The neighborhood changed while unlocked: retry with a fresh range.
    }
  }

  /// Keys currently in the set; test support, no concurrent mutators.
  std::vector<std::uint64_t> keys() const {
    std::vector<std::uint64_t> out;
    for (node* n = head_->next[0].load(std::memory_order_acquire); n != nullptr;
         n = n->next[0].load(std::memory_order_acquire)) {
      if (!n->removed.load(std::memory_order_relaxed)) out.push_back(n->key);
    }
    return out;
  }

  RangeLock& key_lock() noexcept { return key_lock_; }

  static constexpr std::size_t node_header_bytes() noexcept { return sizeof(node); }

 private:
  struct node {
    std::uint64_t key = 0;
    int top_level = 0;
    std::atomic<bool> fully_linked{false};
    std::atomic<bool> removed{false};
    std::unique_ptr<std::atomic<node*>[]> next;
  };

  static node* make_node(std::uint64_t key, int top) {
    auto* n = new node;
    n->key = key;
    n->top_level = top;
    n->next = std::make_unique<std::atomic<node*>[]>(static_cast<std::size_t>(top) + 1);
    return n;
  }

  static void check_key(std::uint64_t key) {
    if (key > kMaxKey) throw std::out_of_range("skiplist: key outside the key space");
  }

  // Highest level at which the key was found, or -1.
  int search(std::uint64_t key, node** preds, node** succs) const {
    int found = -1;
    node* pred = head_;
    for (int level = kMaxLevel - 1; level >= 0; --level) {
      node* cur = pred->next[level].load(std::memory_order_acquire);
      while (cur != nullptr && cur->key < key) {
        pred = cur;
        cur = pred->next[level].load(std::memory_order_acquire);
      }
      if (found == -1 && cur != nullptr && cur->key == key) found = level;
      preds[level] = pred;
      succs[level] = cur;
    }
    return found;
  }

  static int random_level() {
    thread_local std::mt19937_64 rng(std::random_device{}());
    const auto bits = rng();
    const int lvl = std::countr_one(bits);
    return lvl >= kMaxLevel ? kMaxLevel - 1 : lvl;
  }

  epoch_domain* domain_;
  RangeLock key_lock_;
  node* head_;
};

}  // namespace rangelock
