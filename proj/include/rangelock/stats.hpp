#pragma once

#include <atomic>
#include <cstdint>

namespace rangelock {

/// Optional instrumentation counters. Locks take a nullable pointer to one of
/// these; when null (the default) the hot paths skip all accounting.
struct lock_stats {
  std::atomic<std::uint64_t> acquires{0};
  std::atomic<std::uint64_t> fast_path_acquires{0};  // successful empty-list CAS installs
  std::atomic<std::uint64_t> fast_path_cas{0};       // empty-list CAS attempts
  std::atomic<std::uint64_t> node_visits{0};         // nodes examined during insertion
  std::atomic<std::uint64_t> release_rmw_ops{0};     // atomic RMWs issued by release()
  std::atomic<std::uint64_t> wait_loops{0};          // times a blocker wait was entered
  std::atomic<std::uint64_t> restarts{0};            // traversals restarted from head
  std::atomic<std::uint64_t> unlinks{0};             // marked nodes physically removed
  std::atomic<std::uint64_t> writer_retreats{0};     // writer validation conflicts

  void reset() {
    acquires = 0;
    fast_path_acquires = 0;
    fast_path_cas = 0;
    node_visits = 0;
    release_rmw_ops = 0;
    wait_loops = 0;
    restarts = 0;
    unlinks = 0;
    writer_retreats = 0;
  }
};

}  // namespace rangelock
