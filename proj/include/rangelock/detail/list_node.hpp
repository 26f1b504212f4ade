#pragma once

#include <atomic>
#include <cstdint>

#include "../contract.hpp"

namespace rangelock::detail {

// A node's successor link is a single machine word; the least significant bit
// is the logical-deletion mark. On the fast path the list head word itself may
// carry the mark.
using word = std::uintptr_t;

inline constexpr word kMarkBit = 1;

inline bool is_marked(word w) noexcept { return (w & kMarkBit) != 0; }
inline word strip_mark(word w) noexcept { return w & ~kMarkBit; }
inline word with_mark(word w) noexcept { return w | kMarkBit; }

#ifndef NDEBUG
inline constexpr std::uint64_t kPoison = 0xdeadbeefdeadbeefull;
#endif

struct alignas(64) list_node {
  std::uint64_t start = 0;
  std::uint64_t end = 0;
  bool reader = false;
  // Next node in the lock's list, or 0; LSB set once by the releasing owner.
  std::atomic<word> succ{0};
  // Owner-private free-list link while the node sits in a pool.
  list_node* pool_next = nullptr;
#ifndef NDEBUG
  std::atomic<bool> retired{false};
#endif
};

inline word to_word(const list_node* n) noexcept {
  return reinterpret_cast<word>(n);
}

inline list_node* to_node(word w) noexcept {
  return reinterpret_cast<list_node*>(strip_mark(w));
}

// Debug-only detector for reads of a node whose grace period already elapsed.
inline void check_not_poisoned(const list_node* n) {
#ifndef NDEBUG
  RANGELOCK_CONTRACT(n->start != kPoison || n->end != kPoison,
                     "list traversal read a reclaimed node");
#else
  (void)n;
#endif
}

}  // namespace rangelock::detail
