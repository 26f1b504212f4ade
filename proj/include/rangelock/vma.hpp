#pragma once

#include <atomic>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "contract.hpp"
#include "list_lock.hpp"
#include "range.hpp"

namespace rangelock::vm {

inline constexpr std::uint64_t kPageSize = 4096;
// The full range [0, 2^64-1); its write acquisition serializes everything.
inline constexpr std::uint64_t kFullRangeEnd = std::numeric_limits<std::uint64_t>::max();

using prot_flags = std::uint32_t;
inline constexpr prot_flags prot_none = 0;
inline constexpr prot_flags prot_read = 1;
inline constexpr prot_flags prot_write = 2;
inline constexpr prot_flags prot_exec = 4;

enum class mprotect_outcome : std::uint8_t { speculative_success, full_path_success, error };
enum class munmap_outcome : std::uint8_t { ok, error };
enum class fault_outcome : std::uint8_t { ok, segfault };
enum class fault_access : std::uint8_t { read, write };

struct vma_info {
  std::uint64_t start;
  std::uint64_t end;
  prot_flags prot;

  friend bool operator==(const vma_info&, const vma_info&) = default;
};

/// User-space model of a virtual address space: an ordered index of disjoint
/// page-aligned VMAs synchronized by one reader-writer range lock.
///
/// mprotect runs speculatively: locate the VMA under a read lock on the input
/// range, re-lock the VMA widened by one page on each side for write, and
/// validate via a global sequence number (bumped by every full-range write
/// release) plus the VMA bounds. Metadata-only changes (boundary shifts
/// between adjacent VMAs, in-place protection flips) complete under that
/// refined lock; anything that must insert, remove or merge index nodes
/// restarts under a full-range write lock. Page faults take a read lock of a
/// single page, so they run in parallel with non-overlapping mprotects.
class address_space {
 public:
  struct speculation_stats {
    std::atomic<std::uint64_t> mprotect_calls{0};
    std::atomic<std::uint64_t> speculative_successes{0};
    std::atomic<std::uint64_t> full_path_completions{0};
    std::atomic<std::uint64_t> validation_retries{0};
    std::atomic<std::uint64_t> errors{0};
  };

  explicit address_space(epoch_domain& domain = epoch_domain::global(),
                         std::uint64_t mmap_base = 0x10000)
      : lock_(domain), mmap_base_(mmap_base) {}

  address_space(const address_space&) = delete;
  address_space& operator=(const address_space&) = delete;

  /// Lowest-fit placement at or above the construction base. Returns the
  /// mapped address, or nullopt for an invalid size.
  std::optional<std::uint64_t> mmap(std::uint64_t size, prot_flags prot) {
    if (size == 0 || size % kPageSize != 0) return std::nullopt;
    auto h = acquire_full_write();
    std::uint64_t addr = mmap_base_;
    for (const auto& v : index_) {
      const std::uint64_t s = v->start.load(std::memory_order_relaxed);
      const std::uint64_t e = v->end.load(std::memory_order_relaxed);
      if (s >= addr && s - addr >= size) break;
      if (e > addr) addr = e;
    }
    if (addr + size < addr || addr + size > kFullRangeEnd) {
      release_full_write(h);
      return std::nullopt;
    }
    insert_vma(addr, addr + size, prot);
    merge_around(addr, addr + size);
    release_full_write(h);
    return addr;
  }

  munmap_outcome munmap(std::uint64_t addr, std::uint64_t size) {
    if (size == 0 || addr % kPageSize != 0 || size % kPageSize != 0 || addr + size < addr) {
      return munmap_outcome::error;
    }
    auto h = acquire_full_write();
    const bool any = erase_range(addr, addr + size);
    release_full_write(h);
    return any ? munmap_outcome::ok : munmap_outcome::error;
  }

  mprotect_outcome mprotect(std::uint64_t addr, std::uint64_t size, prot_flags prot) {
    stats_.mprotect_calls.fetch_add(1, std::memory_order_relaxed);
    if (size == 0 || addr % kPageSize != 0 || size % kPageSize != 0 || addr + size < addr) {
      stats_.errors.fetch_add(1, std::memory_order_relaxed);
      return mprotect_outcome::error;
    }
    const std::uint64_t end_r = addr + size;
    bool speculate = true;
    for (;;) {
      if (!speculate) {
        auto h = acquire_full_write();
        const bool ok = apply_mprotect_full(addr, end_r, prot);
        release_full_write(h);
        if (!ok) {
          stats_.errors.fetch_add(1, std::memory_order_relaxed);
          return mprotect_outcome::error;
        }
        stats_.full_path_completions.fetch_add(1, std::memory_order_relaxed);
        return mprotect_outcome::full_path_success;
      }

      auto rh = lock_.acquire(addr, end_r, access::reader);
      const std::size_t pos = find_vma_pos(addr);
      if (pos == npos || index_[pos]->start.load(std::memory_order_acquire) > addr) {
        lock_.release(rh);  // hole at addr: nothing to change
        stats_.errors.fetch_add(1, std::memory_order_relaxed);
        return mprotect_outcome::error;
      }
      vma* v = index_[pos].get();
      const std::uint64_t seq0 = seq_.load(std::memory_order_seq_cst);
      const std::uint64_t v_start = v->start.load(std::memory_order_acquire);
      const std::uint64_t v_end = v->end.load(std::memory_order_acquire);
      const std::uint64_t wide_start = v_start >= kPageSize ? v_start - kPageSize : 0;
      const std::uint64_t wide_end =
          v_end > kFullRangeEnd - kPageSize ? kFullRangeEnd : v_end + kPageSize;
      lock_.release(rh);

      auto wh = lock_.acquire(wide_start, wide_end, access::writer);
      // The seq check must come first: if it passed, no structural change
      // happened and the recorded position still refers to a live VMA.
      if (seq0 != seq_.load(std::memory_order_seq_cst) ||
          v_start != v->start.load(std::memory_order_acquire) ||
          v_end != v->end.load(std::memory_order_acquire)) {
        lock_.release(wh);
        stats_.validation_retries.fetch_add(1, std::memory_order_relaxed);
        continue;
      }

      if (end_r > v_end) {
        // Spans past this VMA (next mapping or a hole): decide on the full path.
        lock_.release(wh);
        speculate = false;
        continue;
      }
      if (v->prot.load(std::memory_order_acquire) == prot) {
        lock_.release(wh);  // nothing to change
        stats_.speculative_successes.fetch_add(1, std::memory_order_relaxed);
        return mprotect_outcome::speculative_success;
      }

      vma* prev = pos > 0 ? index_[pos - 1].get() : nullptr;
      vma* next = pos + 1 < index_.size() ? index_[pos + 1].get() : nullptr;
      const bool prev_absorbs = prev != nullptr &&
                                prev->end.load(std::memory_order_acquire) == v_start &&
                                prev->prot.load(std::memory_order_acquire) == prot;
      const bool next_absorbs = next != nullptr &&
                                next->start.load(std::memory_order_acquire) == v_end &&
                                next->prot.load(std::memory_order_acquire) == prot;

      if (addr == v_start && end_r == v_end) {
        // Whole-VMA flip is metadata-only unless it enables a merge.
        if (!prev_absorbs && !next_absorbs) {
          v->prot.store(prot, std::memory_order_release);
          lock_.release(wh);
          stats_.speculative_successes.fetch_add(1, std::memory_order_relaxed);
          return mprotect_outcome::speculative_success;
        }
      } else if (addr == v_start && prev_absorbs) {
        // Head pages move to the same-prot left neighbor: boundary shift only.
        v->start.store(end_r, std::memory_order_release);
        prev->end.store(end_r, std::memory_order_release);
        lock_.release(wh);
        stats_.speculative_successes.fetch_add(1, std::memory_order_relaxed);
        return mprotect_outcome::speculative_success;
      } else if (end_r == v_end && next_absorbs) {
        // Tail pages move to the same-prot right neighbor.
        v->end.store(addr, std::memory_order_release);
        next->start.store(addr, std::memory_order_release);
        lock_.release(wh);
        stats_.speculative_successes.fetch_add(1, std::memory_order_relaxed);
        return mprotect_outcome::speculative_success;
      }

      // Split or merge required: structural, so redo under the full range.
      lock_.release(wh);
      speculate = false;
    }
  }

  fault_outcome page_fault(std::uint64_t addr, fault_access acc = fault_access::read) {
    const std::uint64_t page = addr & ~(kPageSize - 1);
    auto h = lock_.acquire(page, page_lock_end(page), access::reader);
    bool ok = false;
    const std::size_t pos = find_vma_pos(addr);
    if (pos != npos) {
      const vma& v = *index_[pos];
      const std::uint64_t s = v.start.load(std::memory_order_acquire);
      const std::uint64_t e = v.end.load(std::memory_order_acquire);
      const prot_flags p = v.prot.load(std::memory_order_acquire);
      ok = s <= addr && addr < e &&
           (acc == fault_access::read ? (p & prot_read) != 0 : (p & prot_write) != 0);
    }
    lock_.release(h);
    return ok ? fault_outcome::ok : fault_outcome::segfault;
  }

  /// First VMA whose end is greater than addr, under a one-page read lock.
  /// Diagnostic surface; the caller must re-check containment.
  std::optional<vma_info> lookup(std::uint64_t addr) {
    const std::uint64_t page = addr & ~(kPageSize - 1);
    auto h = lock_.acquire(page, page_lock_end(page), access::reader);
    std::optional<vma_info> out;
    const std::size_t pos = find_vma_pos(addr);
    if (pos != npos) {
      const vma& v = *index_[pos];
      out = vma_info{v.start.load(std::memory_order_acquire),
                     v.end.load(std::memory_order_acquire),
                     v.prot.load(std::memory_order_acquire)};
    }
    lock_.release(h);
    return out;
  }

  std::uint64_t seq() const noexcept { return seq_.load(std::memory_order_seq_cst); }
  const speculation_stats& stats() const noexcept { return stats_; }

  /// Quiescent view of the index; test support.
  std::vector<vma_info> snapshot() const {
    std::vector<vma_info> out;
    out.reserve(index_.size());
    for (const auto& v : index_) {
      out.push_back({v->start.load(std::memory_order_acquire),
                     v->end.load(std::memory_order_acquire),
                     v->prot.load(std::memory_order_acquire)});
    }
    return out;
  }

 private:
  struct vma {
    std::atomic<std::uint64_t> start;
    std::atomic<std::uint64_t> end;
    std::atomic<prot_flags> prot;

    vma(std::uint64_t s, std::uint64_t e, prot_flags p) : start(s), end(e), prot(p) {}
  };

  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  static std::uint64_t page_lock_end(std::uint64_t page) noexcept {
    return page > kFullRangeEnd - kPageSize ? kFullRangeEnd : page + kPageSize;
  }

  using full_handle = rw_list_range_lock::handle;

  full_handle acquire_full_write() {
    auto h = lock_.acquire(0, kFullRangeEnd, access::writer);
#ifndef NDEBUG
    full_write_held_.store(true, std::memory_order_relaxed);
#endif
    return h;
  }

  void release_full_write(full_handle& h) {
#ifndef NDEBUG
    full_write_held_.store(false, std::memory_order_relaxed);
#endif
    seq_.fetch_add(1, std::memory_order_seq_cst);
    lock_.release(h);
  }

  void assert_structural_allowed() const {
#ifndef NDEBUG
    RANGELOCK_CONTRACT(full_write_held_.load(std::memory_order_relaxed),
                       "structural index change outside the full-range write lock");
#endif
  }

  // Index position of the first VMA with end > addr, or npos.
  std::size_t find_vma_pos(std::uint64_t addr) const {
    std::size_t lo = 0;
    std::size_t hi = index_.size();
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (index_[mid]->end.load(std::memory_order_acquire) <= addr) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    return lo == index_.size() ? npos : lo;
  }

  // --- structural helpers; full-range write lock required -------------------

  void insert_vma(std::uint64_t start, std::uint64_t end, prot_flags prot) {
    assert_structural_allowed();
    std::size_t pos = 0;
    while (pos < index_.size() && index_[pos]->start.load(std::memory_order_relaxed) < start) {
      ++pos;
    }
    index_.insert(index_.begin() + static_cast<std::ptrdiff_t>(pos),
                  std::make_unique<vma>(start, end, prot));
  }

  void erase_vma(std::size_t pos) {
    assert_structural_allowed();
    index_.erase(index_.begin() + static_cast<std::ptrdiff_t>(pos));
  }

  // Coalesce same-prot adjacent VMAs around [start, end).
  void merge_around(std::uint64_t start, std::uint64_t end) {
    assert_structural_allowed();
    std::size_t pos = 0;
    while (pos < index_.size() && index_[pos]->end.load(std::memory_order_relaxed) < start) {
      ++pos;
    }
    while (pos + 1 < index_.size()) {
      vma& a = *index_[pos];
      vma& b = *index_[pos + 1];
      if (a.start.load(std::memory_order_relaxed) > end) break;
      if (a.end.load(std::memory_order_relaxed) == b.start.load(std::memory_order_relaxed) &&
          a.prot.load(std::memory_order_relaxed) == b.prot.load(std::memory_order_relaxed)) {
        a.end.store(b.end.load(std::memory_order_relaxed), std::memory_order_release);
        erase_vma(pos + 1);
      } else {
        ++pos;
      }
    }
  }

  bool erase_range(std::uint64_t start, std::uint64_t end) {
    bool any = false;
    std::size_t pos = 0;
    while (pos < index_.size()) {
      vma& v = *index_[pos];
      const std::uint64_t s = v.start.load(std::memory_order_relaxed);
      const std::uint64_t e = v.end.load(std::memory_order_relaxed);
      if (e <= start) {
        ++pos;
        continue;
      }
      if (s >= end) break;
      any = true;
      if (s < start && e > end) {  // punch a hole: split into two
        v.end.store(start, std::memory_order_release);
        insert_vma(end, e, v.prot.load(std::memory_order_relaxed));
        break;
      }
      if (s < start) {  // trim the tail
        v.end.store(start, std::memory_order_release);
        ++pos;
      } else if (e > end) {  // trim the head
        v.start.store(end, std::memory_order_release);
        break;
      } else {  // fully covered
        erase_vma(pos);
      }
    }
    return any;
  }

  bool covered(std::uint64_t start, std::uint64_t end) const {
    std::uint64_t cursor = start;
    for (const auto& v : index_) {
      if (cursor >= end) break;
      const std::uint64_t s = v->start.load(std::memory_order_relaxed);
      const std::uint64_t e = v->end.load(std::memory_order_relaxed);
      if (e <= cursor) continue;
      if (s > cursor) return false;
      cursor = e;
    }
    return cursor >= end;
  }

  bool apply_mprotect_full(std::uint64_t start, std::uint64_t end, prot_flags prot) {
    if (!covered(start, end)) return false;
    std::size_t pos = 0;
    while (pos < index_.size()) {
      vma& v = *index_[pos];
      const std::uint64_t s = v.start.load(std::memory_order_relaxed);
      const std::uint64_t e = v.end.load(std::memory_order_relaxed);
      if (e <= start) {
        ++pos;
        continue;
      }
      if (s >= end) break;
      const prot_flags old = v.prot.load(std::memory_order_relaxed);
      if (old == prot) {
        ++pos;
        continue;
      }
      if (s < start) {
        // Keep [s, start) as-is, re-handle the rest as its own VMA.
        v.end.store(start, std::memory_order_release);
        insert_vma(start, e, old);
        ++pos;
        continue;
      }
      if (e > end) {  // [s, end) flips, [end, e) keeps the old flags
        v.end.store(end, std::memory_order_release);
        v.prot.store(prot, std::memory_order_release);
        insert_vma(end, e, old);
        ++pos;
        continue;
      }
      v.prot.store(prot, std::memory_order_release);  // fully covered: flip
      ++pos;
    }
    merge_around(start == 0 ? 0 : start - 1, end == kFullRangeEnd ? end : end + 1);
    return true;
  }

  std::vector<std::unique_ptr<vma>> index_;  // disjoint, sorted by start
  rw_list_range_lock lock_;
  std::atomic<std::uint64_t> seq_{0};
  std::uint64_t mmap_base_;
  speculation_stats stats_;
#ifndef NDEBUG
  std::atomic<bool> full_write_held_{false};
#endif
};

}  // namespace rangelock::vm
