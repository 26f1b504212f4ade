#pragma once

// Shadow-occupancy harness shared by every lock family: a small address space
// of per-slot atomic counters. Each critical section increments the counters
// of its slots on entry (readers add 1, writers add 1<<32) and decrements on
// exit. A writer entering a nonzero slot, or a reader entering a slot with the
// writer bit set, is an exclusion violation.

#include <atomic>
#include <barrier>
#include <chrono>
#include <cstdint>
#include <functional>
#include <random>
#include <thread>
#include <vector>

#include "rangelock/list_lock.hpp"
#include "rangelock/range.hpp"

namespace harness {

constexpr std::uint64_t kWriterUnit = 1ull << 32;

struct occupancy_result {
  std::uint64_t violations = 0;
  std::uint64_t ops = 0;
};

inline std::pair<std::uint32_t, std::uint32_t> draw_range(std::mt19937_64& rng,
                                                          std::uint32_t slots) {
  for (;;) {
    auto a = static_cast<std::uint32_t>(rng() % slots);
    auto b = static_cast<std::uint32_t>(rng() % slots);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    return {a, b};
  }
}

template <class Lock>
occupancy_result run_occupancy(Lock& lock, std::uint32_t threads,
                               std::uint64_t ops_per_thread, std::uint32_t slots,
                               std::uint32_t read_pct, std::uint64_t seed) {
  std::vector<std::atomic<std::uint64_t>> shadow(slots);
  std::atomic<std::uint64_t> violations{0};
  std::barrier sync(static_cast<std::ptrdiff_t>(threads));

  auto body = [&](std::uint32_t tid) {
    std::mt19937_64 rng(seed * 0x9e3779b9u + tid * 127u + 1);
    sync.arrive_and_wait();
    for (std::uint64_t n = 0; n < ops_per_thread; ++n) {
      const auto [s, e] = draw_range(rng, slots);
      const bool is_read = (rng() % 100) < read_pct;
      auto h = lock.acquire(s, e, is_read ? rangelock::access::reader
                                          : rangelock::access::writer);
      if (is_read) {
        for (std::uint32_t i = s; i < e; ++i) {
          if (shadow[i].fetch_add(1, std::memory_order_acq_rel) >= kWriterUnit) {
            violations.fetch_add(1, std::memory_order_relaxed);
          }
        }
      } else {
        for (std::uint32_t i = s; i < e; ++i) {
          if (shadow[i].fetch_add(kWriterUnit, std::memory_order_acq_rel) != 0) {
            violations.fetch_add(1, std::memory_order_relaxed);
          }
        }
      }
      const std::uint64_t delta = is_read ? 1 : kWriterUnit;
      for (std::uint32_t i = s; i < e; ++i) {
        shadow[i].fetch_sub(delta, std::memory_order_acq_rel);
      }
      lock.release(h);
    }
  };

  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (std::uint32_t t = 0; t < threads; ++t) workers.emplace_back(body, t);
  for (auto& t : workers) t.join();
  return {violations.load(), std::uint64_t{threads} * ops_per_thread};
}

/// Lost-update oracle: every thread runs acquire-increment-release passes over
/// random ranges of a shared plain array while keeping private tallies; the
/// final per-slot sums must match exactly.
template <class Lock>
bool run_lost_update(Lock& lock, std::uint32_t threads, std::uint64_t ops_per_thread,
                     std::uint32_t slots, std::uint64_t seed) {
  std::vector<std::uint64_t> array(slots, 0);
  std::vector<std::vector<std::uint64_t>> tallies(threads,
                                                  std::vector<std::uint64_t>(slots, 0));
  std::barrier sync(static_cast<std::ptrdiff_t>(threads));
  auto body = [&](std::uint32_t tid) {
    std::mt19937_64 rng(seed + tid * 7919u);
    sync.arrive_and_wait();
    for (std::uint64_t n = 0; n < ops_per_thread; ++n) {
      const auto [s, e] = draw_range(rng, slots);
      auto h = lock.acquire(s, e, rangelock::access::writer);
      for (std::uint32_t i = s; i < e; ++i) {
        array[i] += 1;
        ++tallies[tid][i];
      }
      lock.release(h);
    }
  };
  std::vector<std::thread> workers;
  for (std::uint32_t t = 0; t < threads; ++t) workers.emplace_back(body, t);
  for (auto& t : workers) t.join();

  for (std::uint32_t i = 0; i < slots; ++i) {
    std::uint64_t expect = 0;
    for (const auto& tally : tallies) expect += tally[i];
    if (array[i] != expect) return false;
  }
  return true;
}

/// Checkpointed stress for the list locks: every round the workers acquire and
/// park while the checker walks the quiescent snapshot and validates the
/// sortedness invariants over unmarked nodes.
template <class Lock>
std::uint64_t run_checkpointed(Lock& lock, bool reader_writer, std::uint32_t threads,
                               std::uint32_t rounds, std::uint32_t slots,
                               std::uint64_t seed) {
  std::barrier sync(static_cast<std::ptrdiff_t>(threads) + 1);
  std::atomic<std::uint64_t> violations{0};

  auto body = [&](std::uint32_t tid) {
    std::mt19937_64 rng(seed + tid * 31u);
    for (std::uint32_t r = 0; r < rounds; ++r) {
      const auto [s, e] = draw_range(rng, slots);
      const bool is_read = reader_writer && (rng() % 2) == 0;
      auto h = lock.acquire(s, e, is_read ? rangelock::access::reader
                                          : rangelock::access::writer);
      sync.arrive_and_wait();  // all holding: checker inspects
      sync.arrive_and_wait();  // checker done
      lock.release(h);
      sync.arrive_and_wait();  // round complete
    }
  };

  std::vector<std::thread> workers;
  for (std::uint32_t t = 0; t < threads; ++t) workers.emplace_back(body, t);
  for (std::uint32_t r = 0; r < rounds; ++r) {
    sync.arrive_and_wait();
    const auto snap = lock.quiescent_snapshot();
    const rangelock::snapshot_entry* prev = nullptr;
    for (const auto& entry : snap) {
      if (entry.marked) continue;
      if (prev != nullptr) {
        if (prev->start > entry.start) violations.fetch_add(1);
        if (reader_writer) {
          if (prev->mode == rangelock::access::writer && prev->end > entry.start) {
            violations.fetch_add(1);
          }
        } else if (prev->end > entry.start) {
          violations.fetch_add(1);
        }
      }
      prev = &entry;
    }
    sync.arrive_and_wait();
    sync.arrive_and_wait();
  }
  for (auto& t : workers) t.join();
  return violations.load();
}

template <class Pred>
bool eventually(Pred&& pred, double seconds) {
  const auto deadline =
      std::chrono::steady_clock::now() + std::chrono::duration<double>(seconds);
  while (std::chrono::steady_clock::now() < deadline) {
    if (pred()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  return pred();
}

}  // namespace harness
