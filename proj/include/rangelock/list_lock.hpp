#pragma once

#include <optional>
#include <utility>

#include "detail/range_list.hpp"

namespace rangelock {

/// Single-use token for one range acquisition on a list-based lock.
class list_handle {
 public:
  list_handle() = default;
  list_handle(list_handle&& o) noexcept : node_(std::exchange(o.node_, nullptr)) {}
  list_handle& operator=(list_handle&& o) noexcept {
    node_ = std::exchange(o.node_, nullptr);
    return *this;
  }
  list_handle(const list_handle&) = delete;
  list_handle& operator=(const list_handle&) = delete;

  bool valid() const noexcept { return node_ != nullptr; }

 private:
  explicit list_handle(detail::list_node* n) noexcept : node_(n) {}
  detail::list_node* node_ = nullptr;

  friend class list_range_lock;
  friend class rw_list_range_lock;
};

/// Exclusive-access list-based range lock: acquired ranges live in a sorted
/// lock-free linked list; non-overlapping ranges are held concurrently.
/// Release is a single fetch-and-add on the node's successor word.
class list_range_lock {
 public:
  using handle = list_handle;

  explicit list_range_lock(epoch_domain& domain = epoch_domain::global(),
                           lock_stats* stats = nullptr)
      : list_(domain, stats, rw_preference::reader) {}

  handle acquire(std::uint64_t start, std::uint64_t end) {
    require_valid(start, end);
    return handle{list_.acquire(start, end, /*reader=*/false)};
  }

  // Mode-taking overload so all lock families share one call shape; the
  // exclusive variant treats every acquisition as a writer.
  handle acquire(std::uint64_t start, std::uint64_t end, access) {
    return acquire(start, end);
  }

  /// Bounded variant: gives up after `max_failures` traversal restarts caused
  /// by a marked predecessor. Used by the fairness gate.
  std::optional<handle> try_acquire(std::uint64_t start, std::uint64_t end,
                                    std::uint64_t max_failures) {
    require_valid(start, end);
    detail::list_node* n = list_.acquire(start, end, /*reader=*/false, max_failures);
    if (n == nullptr) return std::nullopt;
    return handle{n};
  }

  std::optional<handle> try_acquire(std::uint64_t start, std::uint64_t end, access,
                                    std::uint64_t max_failures) {
    return try_acquire(start, end, max_failures);
  }

  void release(handle& h) {
    RANGELOCK_CONTRACT(h.valid(), "release of an empty handle");
    list_.release(std::exchange(h.node_, nullptr));
  }

  /// Ordered walk of the list including marked nodes; test support only, the
  /// caller guarantees no concurrent mutators.
  std::vector<snapshot_entry> quiescent_snapshot() const { return list_.snapshot(); }

 private:
  static void require_valid(std::uint64_t start, std::uint64_t end) {
    if (start >= end) throw std::invalid_argument("range lock: require start < end");
  }

  detail::range_list<detail::exclusive_policy> list_;
};

/// Reader-writer list-based range lock. Readers may overlap readers; a
/// post-insert validation resolves the reader/writer insertion race, with
/// writers retreating and retrying on conflict (under the default reader
/// preference).
class rw_list_range_lock {
 public:
  using handle = list_handle;

  explicit rw_list_range_lock(epoch_domain& domain = epoch_domain::global(),
                              lock_stats* stats = nullptr,
                              rw_preference pref = rw_preference::reader)
      : list_(domain, stats, pref) {}

  handle acquire(std::uint64_t start, std::uint64_t end, access mode) {
    require_valid(start, end);
    return handle{list_.acquire(start, end, mode == access::reader)};
  }

  /// Bounded variant: gives up after `max_failures` writer validation
  /// conflicts (readers never fail validation under reader preference).
  std::optional<handle> try_acquire(std::uint64_t start, std::uint64_t end, access mode,
                                    std::uint64_t max_failures) {
    require_valid(start, end);
    detail::list_node* n =
        list_.acquire(start, end, mode == access::reader, max_failures);
    if (n == nullptr) return std::nullopt;
    return handle{n};
  }

  void release(handle& h) {
    RANGELOCK_CONTRACT(h.valid(), "release of an empty handle");
    list_.release(std::exchange(h.node_, nullptr));
  }

  std::vector<snapshot_entry> quiescent_snapshot() const { return list_.snapshot(); }

 private:
  static void require_valid(std::uint64_t start, std::uint64_t end) {
    if (start >= end) throw std::invalid_argument("range lock: require start < end");
  }

  detail::range_list<detail::rw_policy> list_;
};

}  // namespace rangelock
