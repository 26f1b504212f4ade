#pragma once

#include <cassert>
#include <cstdint>
#include <memory>
#include <shared_mutex>
#include <stdexcept>

#include "range.hpp"

namespace rangelock {

/// Segment-array baseline: the span is divided into a preset number of
/// segments, each guarded by a reader-writer mutex. Acquiring a range takes
/// the mutexes of every covered segment in ascending index order (which makes
/// the construction deadlock-free); the full range is therefore the most
/// expensive acquisition.
class segment_range_lock {
 public:
  class handle {
   public:
    handle() = default;
    handle(handle&& o) noexcept
        : first_(o.first_), last_(o.last_), reader_(o.reader_), valid_(std::exchange(o.valid_, false)) {}
    handle& operator=(handle&& o) noexcept {
      first_ = o.first_;
      last_ = o.last_;
      reader_ = o.reader_;
      valid_ = std::exchange(o.valid_, false);
      return *this;
    }
    handle(const handle&) = delete;
    handle& operator=(const handle&) = delete;
    bool valid() const noexcept { return valid_; }

   private:
    handle(std::uint32_t first, std::uint32_t last, bool reader) noexcept
        : first_(first), last_(last), reader_(reader), valid_(true) {}
    std::uint32_t first_ = 0;
    std::uint32_t last_ = 0;
    bool reader_ = false;
    bool valid_ = false;
    friend class segment_range_lock;
  };

  explicit segment_range_lock(std::uint64_t span, std::uint32_t segments = 256)
      : span_(span),
        segments_(segments),
        width_((span + segments - 1) / segments),
        locks_(std::make_unique<padded_mutex[]>(segments)) {
    if (span == 0 || segments == 0) {
      throw std::invalid_argument("segment lock: span and segment count must be positive");
    }
  }

  handle acquire(std::uint64_t start, std::uint64_t end, access mode = access::writer) {
    if (start >= end) throw std::invalid_argument("range lock: require start < end");
    if (end > span_) throw std::out_of_range("segment lock: range outside the span");
    const auto first = static_cast<std::uint32_t>(start / width_);
    const auto last = static_cast<std::uint32_t>((end - 1) / width_);
    // Segments are taken in ascending index order; release order is free.
    for (std::uint32_t i = first; i <= last; ++i) {
      if (mode == access::reader) {
        locks_[i].m.lock_shared();
      } else {
        locks_[i].m.lock();
      }
    }
    return handle{first, last, mode == access::reader};
  }

  void release(handle& h) {
    for (std::uint32_t i = h.first_; i <= h.last_; ++i) {
      if (h.reader_) {
        locks_[i].m.unlock_shared();
      } else {
        locks_[i].m.unlock();
      }
    }
    h.valid_ = false;
  }

  std::uint64_t span() const noexcept { return span_; }
  std::uint32_t segments() const noexcept { return segments_; }

 private:
  struct alignas(64) padded_mutex {
    std::shared_mutex m;
  };

  std::uint64_t span_;
  std::uint32_t segments_;
  std::uint64_t width_;
  std::unique_ptr<padded_mutex[]> locks_;
};

}  // namespace rangelock
