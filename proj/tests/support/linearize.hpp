#pragma once

// Small-history linearizability checker for set histories (insert / remove /
// contains over a small key universe). Wing&Gong-style search: repeatedly pick
// a pending operation no other un-linearized operation completed before,
// apply sequential set semantics, and backtrack on result mismatches. Visited
// (progress, set-state) pairs are memoized.

#include <array>
#include <cstdint>
#include <unordered_set>
#include <vector>

namespace harness {

enum class set_op : std::uint8_t { insert, remove, contains };

struct history_event {
  std::uint32_t thread;
  set_op op;
  std::uint64_t key;
  bool result;
  std::uint64_t invoke;
  std::uint64_t response;
};

class set_lin_checker {
 public:
  // keys must be < 24 and total events <= 64 with <= 4 threads.
  explicit set_lin_checker(const std::vector<history_event>& events) {
    for (const auto& e : events) {
      if (e.thread >= per_thread_.size()) continue;
      per_thread_[e.thread].push_back(e);
    }
    for (auto& v : per_thread_) {
      // program order == invoke order within a thread
      for (std::size_t i = 1; i < v.size(); ++i) {
        for (std::size_t j = i; j > 0 && v[j - 1].invoke > v[j].invoke; --j) {
          std::swap(v[j - 1], v[j]);
        }
      }
    }
  }

  bool linearizable() {
    failed_.clear();
    std::array<std::uint8_t, 4> progress{};
    return dfs(progress, 0);
  }

 private:
  static std::uint64_t encode(const std::array<std::uint8_t, 4>& progress,
                              std::uint32_t mask) {
    std::uint64_t k = mask;
    for (int t = 0; t < 4; ++t) k = (k << 8) | progress[t];
    return k;
  }

  bool all_done(const std::array<std::uint8_t, 4>& progress) const {
    for (int t = 0; t < 4; ++t) {
      if (progress[t] < per_thread_[t].size()) return false;
    }
    return true;
  }

  bool dfs(std::array<std::uint8_t, 4>& progress, std::uint32_t mask) {
    if (all_done(progress)) return true;
    const std::uint64_t key = encode(progress, mask);
    if (failed_.count(key) != 0) return false;

    // An op may linearize first only if no other pending op responded before
    // it was invoked.
    std::uint64_t min_response = ~0ull;
    for (int t = 0; t < 4; ++t) {
      if (progress[t] < per_thread_[t].size()) {
        min_response = std::min(min_response, per_thread_[t][progress[t]].response);
      }
    }
    for (int t = 0; t < 4; ++t) {
      if (progress[t] >= per_thread_[t].size()) continue;
      const auto& e = per_thread_[t][progress[t]];
      if (e.invoke > min_response) continue;
      const auto bit = std::uint32_t{1} << e.key;
      bool expect = false;
      std::uint32_t next_mask = mask;
      switch (e.op) {
        case set_op::insert:
          expect = (mask & bit) == 0;
          next_mask |= bit;
          break;
        case set_op::remove:
          expect = (mask & bit) != 0;
          next_mask &= ~bit;
          break;
        case set_op::contains:
          expect = (mask & bit) != 0;
          break;
      }
      if (expect != e.result) continue;
      ++progress[t];
      if (dfs(progress, next_mask)) return true;
      --progress[t];
    }
    failed_.insert(key);
    return false;
  }

  std::array<std::vector<history_event>, 4> per_thread_;
  std::unordered_set<std::uint64_t> failed_;
};

inline bool linearizable_set_history(const std::vector<history_event>& events) {
  return set_lin_checker(events).linearizable();
}

}  // namespace harness
