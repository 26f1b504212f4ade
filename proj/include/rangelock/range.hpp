#pragma once

#include <cstdint>
#include <stdexcept>

namespace rangelock {

enum class access : std::uint8_t { reader, writer };

/// Three-way ordering of two ranges as seen by the list traversal: the probed
/// range is entirely before, entirely after, or in conflict with the other.
enum class range_order : int { before = -1, overlap = 0, after = 1 };

namespace detail {

// Branch order matters and is load-bearing for the reader start-tie: ties
// between two readers resolve to before/after, never overlap.
inline int compare_exclusive_raw(std::uint64_t a_start, std::uint64_t a_end,
                                 std::uint64_t b_start, std::uint64_t b_end) noexcept {
  if (a_start >= b_end) return 1;   // a comes after b, no overlap
  if (b_start >= a_end) return -1;  // a is before b, no overlap
  return 0;                         // a and b overlap
}

inline int compare_rw_raw(std::uint64_t a_start, std::uint64_t a_end, bool a_reader,
                          std::uint64_t b_start, std::uint64_t b_end, bool b_reader) noexcept {
  const bool both_readers = a_reader && b_reader;
  if (b_start >= a_end) return -1;
  if (b_start >= a_start && both_readers) return -1;
  if (a_start >= b_end) return 1;
  if (a_start >= b_start && both_readers) return 1;
  return 0;
}

}  // namespace detail

/// Half-open interval [start, end) of 64-bit addresses plus an access mode.
/// The full range [0, 2^64-1) is representable. Empty and inverted ranges are
/// rejected at construction.
class range {
 public:
  range(std::uint64_t start, std::uint64_t end, access mode = access::writer)
      : start_(start), end_(end), mode_(mode) {
    if (start >= end) throw std::invalid_argument("range: require start < end");
  }

  std::uint64_t start() const noexcept { return start_; }
  std::uint64_t end() const noexcept { return end_; }
  access mode() const noexcept { return mode_; }
  bool is_reader() const noexcept { return mode_ == access::reader; }

  friend bool operator==(const range&, const range&) = default;

 private:
  std::uint64_t start_;
  std::uint64_t end_;
  access mode_;
};

/// Ordering used by the exclusive lock. `a` is a range already in the list
/// (or null for the end-of-list sentinel), `b` is the range being inserted.
inline range_order compare_exclusive(const range* a, const range& b) noexcept {
  if (a == nullptr) return range_order::after;  // end of the list, no overlap
  return range_order{detail::compare_exclusive_raw(a->start(), a->end(), b.start(), b.end())};
}

/// Ordering used by the reader-writer lock: two readers never report overlap,
/// a start tie between readers resolves by the before-branch being tested
/// first.
inline range_order compare_rw(const range* a, const range& b) noexcept {
  if (a == nullptr) return range_order::after;
  return range_order{detail::compare_rw_raw(a->start(), a->end(), a->is_reader(),
                                            b.start(), b.end(), b.is_reader())};
}

inline bool overlaps(const range& a, const range& b) noexcept {
  return a.start() < b.end() && b.start() < a.end();
}

}  // namespace rangelock
