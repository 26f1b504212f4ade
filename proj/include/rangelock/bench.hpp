#pragma once

#include <algorithm>
#include <atomic>
#include <barrier>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#if defined(__linux__)
#include <pthread.h>
#endif

#include "fair.hpp"
#include "list_lock.hpp"
#include "segment_lock.hpp"
#include "skiplist.hpp"
#include "tree_lock.hpp"
#include "vma.hpp"
#include "vma_oracle.hpp"

namespace rangelock::bench {

class bench_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class bench_kind : std::uint8_t {
  arrbench_full,
  arrbench_disjoint,
  arrbench_random,
  skiplist,
  vma_arena,
};

enum class lock_kind : std::uint8_t {
  list_ex,
  list_rw,
  lustre_ex,
  kernel_rw,
  pnova_rw,
  orig,  // per-node-mutex skip list; valid for the skiplist benchmark only
};

inline const char* to_string(bench_kind b) {
  switch (b) {
    case bench_kind::arrbench_full: return "arrbench-full";
    case bench_kind::arrbench_disjoint: return "arrbench-disjoint";
    case bench_kind::arrbench_random: return "arrbench-random";
    case bench_kind::skiplist: return "skiplist";
    case bench_kind::vma_arena: return "vma-arena";
  }
  return "?";
}

inline const char* to_string(lock_kind l) {
  switch (l) {
    case lock_kind::list_ex: return "list-ex";
    case lock_kind::list_rw: return "list-rw";
    case lock_kind::lustre_ex: return "lustre-ex";
    case lock_kind::kernel_rw: return "kernel-rw";
    case lock_kind::pnova_rw: return "pnova-rw";
    case lock_kind::orig: return "orig";
  }
  return "?";
}

inline std::optional<bench_kind> parse_bench_kind(const std::string& s) {
  for (auto b : {bench_kind::arrbench_full, bench_kind::arrbench_disjoint,
                 bench_kind::arrbench_random, bench_kind::skiplist, bench_kind::vma_arena}) {
    if (s == to_string(b)) return b;
  }
  return std::nullopt;
}

inline std::optional<lock_kind> parse_lock_kind(const std::string& s) {
  for (auto l : {lock_kind::list_ex, lock_kind::list_rw, lock_kind::lustre_ex,
                 lock_kind::kernel_rw, lock_kind::pnova_rw, lock_kind::orig}) {
    if (s == to_string(l)) return l;
  }
  return std::nullopt;
}

struct bench_config {
  bench_kind benchmark = bench_kind::arrbench_random;
  lock_kind lock = lock_kind::list_ex;
  std::uint32_t threads = 4;
  std::uint32_t read_pct = 100;  // skiplist: find percentage, updates split evenly
  double duration_secs = 3.0;
  std::uint32_t runs = 5;
  std::uint32_t slots = 256;
  std::uint32_t noop_max = 2048;
  std::uint64_t seed = 1;
  std::uint32_t patience = kNeverEscalate;  // fairness gate threshold for list locks
  bool pin_threads = false;
  std::uint32_t cacheline_bytes = 64;
  bool paper_scale = false;
  std::uint64_t key_range = 0;  // skiplist; 0 derives from paper_scale
  std::uint32_t arena_pages = 512;
  std::uint32_t fault_pct = 50;
};

inline void validate(const bench_config& cfg) {
  if (cfg.threads == 0) throw bench_error("config: threads must be positive");
  if (cfg.read_pct > 100) throw bench_error("config: read_pct must be in 0..100");
  if (cfg.runs == 0) throw bench_error("config: runs must be positive");
  if (cfg.duration_secs <= 0) throw bench_error("config: duration must be positive");
  if (cfg.slots == 0) throw bench_error("config: slots must be positive");
  if (cfg.cacheline_bytes < 8 || cfg.cacheline_bytes % 8 != 0) {
    throw bench_error("config: cacheline_bytes must be a positive multiple of 8");
  }
  switch (cfg.benchmark) {
    case bench_kind::arrbench_full:
    case bench_kind::arrbench_random:
      if (cfg.lock == lock_kind::orig) throw bench_error("config: orig is skiplist-only");
      break;
    case bench_kind::arrbench_disjoint:
      if (cfg.lock == lock_kind::orig) throw bench_error("config: orig is skiplist-only");
      if (cfg.slots / cfg.threads == 0) {
        throw bench_error("config: disjoint variant needs slots >= threads");
      }
      break;
    case bench_kind::skiplist:
      if (cfg.lock != lock_kind::list_ex && cfg.lock != lock_kind::lustre_ex &&
          cfg.lock != lock_kind::orig) {
        throw bench_error("config: skiplist supports list-ex, lustre-ex or orig");
      }
      break;
    case bench_kind::vma_arena:
      if (cfg.lock != lock_kind::list_rw) {
        throw bench_error("config: vma-arena runs on the embedded list-rw lock");
      }
      if (cfg.arena_pages < 4) throw bench_error("config: arena_pages too small");
      break;
  }
}

struct run_result {
  std::vector<std::uint64_t> ops_per_thread;
  double secs = 0;
  double throughput = 0;

  std::uint64_t total_ops() const {
    std::uint64_t t = 0;
    for (auto v : ops_per_thread) t += v;
    return t;
  }
};

struct bench_result {
  bench_config cfg;
  std::vector<run_result> runs;
  double mean_throughput = 0;
  double stddev_throughput = 0;
  // vma-arena extras
  double speculation_success_rate = -1.0;
  std::uint64_t validation_retries = 0;
};

inline void aggregate(bench_result& r) {
  double sum = 0;
  for (const auto& run : r.runs) sum += run.throughput;
  r.mean_throughput = r.runs.empty() ? 0 : sum / static_cast<double>(r.runs.size());
  double var = 0;
  for (const auto& run : r.runs) {
    const double d = run.throughput - r.mean_throughput;
    var += d * d;
  }
  r.stddev_throughput =
      r.runs.size() > 1 ? std::sqrt(var / static_cast<double>(r.runs.size())) : 0.0;
}

// --- workload helpers --------------------------------------------------------

/// Array of 64-bit slots padded to the cache-line stride.
class slot_array {
 public:
  slot_array(std::uint32_t slots, std::uint32_t stride)
      : slots_(slots), stride_(stride), data_(new std::byte[std::size_t{slots} * stride + 64]) {
    const auto raw = reinterpret_cast<std::uintptr_t>(data_.get());
    base_ = reinterpret_cast<std::byte*>((raw + 63) & ~std::uintptr_t{63});
    zero();
  }

  std::uint64_t& at(std::uint32_t i) noexcept {
    return *reinterpret_cast<std::uint64_t*>(base_ + std::size_t{i} * stride_);
  }

  void zero() noexcept {
    for (std::uint32_t i = 0; i < slots_; ++i) at(i) = 0;
  }

  std::uint32_t size() const noexcept { return slots_; }

 private:
  std::uint32_t slots_;
  std::uint32_t stride_;
  std::unique_ptr<std::byte[]> data_;
  std::byte* base_;
};

struct range_draw {
  std::uint32_t start;
  std::uint32_t end;  // exclusive
};

/// Start and end drawn modulo the slot count, switched if inverted; equal
/// draws are re-drawn since empty ranges are invalid.
inline range_draw draw_random_range(std::mt19937_64& rng, std::uint32_t slots) {
  for (;;) {
    auto a = static_cast<std::uint32_t>(rng() % slots);
    auto b = static_cast<std::uint32_t>(rng() % slots);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    return {a, b};
  }
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint32_t run, std::uint32_t tid) {
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (run + 1) + 0x2545f4914f6cdd1dULL * (tid + 1);
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  return x;
}

inline void noop_work(std::uint64_t n) {
  for (std::uint64_t i = 0; i < n; ++i) asm volatile("");
}

inline void pin_to_cpu(std::uint32_t index) {
#if defined(__linux__)
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(index % std::max(1u, std::thread::hardware_concurrency()), &set);
  pthread_setaffinity_np(pthread_self(), sizeof(set), &set);
#else
  (void)index;
#endif
}

// --- CSV ----------------------------------------------------------------------

struct csv_row {
  std::string benchmark;
  std::string lock;
  std::uint32_t threads = 0;
  std::uint32_t read_pct = 0;
  std::uint32_t run = 0;
  std::uint64_t ops = 0;
  double secs = 0;
  double throughput = 0;

  friend bool operator==(const csv_row&, const csv_row&) = default;
};

inline std::vector<csv_row> rows_of(const bench_result& r) {
  std::vector<csv_row> rows;
  rows.reserve(r.runs.size());
  for (std::uint32_t i = 0; i < r.runs.size(); ++i) {
    const auto& run = r.runs[i];
    rows.push_back({to_string(r.cfg.benchmark), to_string(r.cfg.lock), r.cfg.threads,
                    r.cfg.read_pct, i, run.total_ops(), run.secs, run.throughput});
  }
  return rows;
}

inline void emit_csv(const std::vector<csv_row>& rows, std::ostream& os) {
  os << "benchmark,lock,threads,read_pct,run,ops,secs,throughput\n";
  os << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.benchmark << ',' << r.lock << ',' << r.threads << ',' << r.read_pct << ','
       << r.run << ',' << r.ops << ',' << r.secs << ',' << r.throughput << '\n';
  }
  if (!os) throw bench_error("csv: write failed");
}

inline void emit_csv(const std::vector<csv_row>& rows, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw bench_error("csv: cannot open " + path);
  emit_csv(rows, f);
  f.flush();
  if (!f) throw bench_error("csv: write to " + path + " failed");
}

inline std::vector<csv_row> parse_csv(std::istream& is) {
  std::vector<csv_row> rows;
  std::string line;
  if (!std::getline(is, line)) throw bench_error("csv: empty input");
  if (line != "benchmark,lock,threads,read_pct,run,ops,secs,throughput") {
    throw bench_error("csv: unexpected header");
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != 8) throw bench_error("csv: malformed row: " + line);
    csv_row r;
    r.benchmark = f[0];
    r.lock = f[1];
    r.threads = static_cast<std::uint32_t>(std::stoul(f[2]));
    r.read_pct = static_cast<std::uint32_t>(std::stoul(f[3]));
    r.run = static_cast<std::uint32_t>(std::stoul(f[4]));
    r.ops = std::stoull(f[5]);
    r.secs = std::stod(f[6]);
    r.throughput = std::stod(f[7]);
    rows.push_back(std::move(r));
  }
  return rows;
}

// --- reference skip list (per-node mutexes) ------------------------------------

/// Optimistic lazy skip list with one mutex per node; the comparison subject
/// the range-locked design replaces. Removed nodes are parked until
/// destruction so unlocked readers stay safe.
class lazy_skiplist {
 public:
  static constexpr int kMaxLevel = 20;

  lazy_skiplist() : head_(make_node(0, kMaxLevel - 1)) {
    head_->fully_linked.store(true, std::memory_order_relaxed);
  }

  lazy_skiplist(const lazy_skiplist&) = delete;
  lazy_skiplist& operator=(const lazy_skiplist&) = delete;

  ~lazy_skiplist() {
    node* n = head_;
    while (n != nullptr) {
      node* next = n->next[0].load(std::memory_order_relaxed);
      delete n;
      n = next;
    }
    for (node* g : garbage_) delete g;
  }

  bool contains(std::uint64_t key) const {
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
           !cur->marked.load(std::memory_order_acquire);
  }

  bool insert(std::uint64_t key) {
    const int top = random_level();
    node* preds[kMaxLevel];
    node* succs[kMaxLevel];
    spin_wait waiter;
    for (;;) {
      const int found = search(key, preds, succs);
      if (found >= 0) {
        node* f = succs[found];
        if (!f->marked.load(std::memory_order_acquire)) {
          while (!f->fully_linked.load(std::memory_order_acquire)) waiter.pause();
          return false;
        }
        continue;
      }
      int highest_locked = -1;
      node* prev_locked = nullptr;
      bool valid = true;
      for (int lv = 0; valid && lv <= top; ++lv) {
        node* pred = preds[lv];
        node* succ = succs[lv];
        if (pred != prev_locked) {
          pred->lock.lock();
          highest_locked = lv;
          prev_locked = pred;
        }
        valid = !pred->marked.load(std::memory_order_relaxed) &&
                (succ == nullptr || !succ->marked.load(std::memory_order_relaxed)) &&
                pred->next[lv].load(std::memory_order_relaxed) == succ;
      }
      if (!valid) {
        unlock_preds(preds, highest_locked);
        continue;
      }
      node* n = make_node(key, top);
      for (int lv = 0; lv <= top; ++lv) n->next[lv].store(succs[lv], std::memory_order_relaxed);
      for (int lv = 0; lv <= top; ++lv) {
        preds[lv]->next[lv].store(n, std::memory_order_release);
      }
      n->fully_linked.store(true, std::memory_order_release);
      unlock_preds(preds, highest_locked);
      return true;
    }
  }

  bool remove(std::uint64_t key) {
    node* victim = nullptr;
    bool marked_by_us = false;
    int top = -1;
    node* preds[kMaxLevel];
    node* succs[kMaxLevel];
    for (;;) {
      const int found = search(key, preds, succs);
      if (!marked_by_us) {
        if (found < 0) return false;
        victim = succs[found];
        if (!victim->fully_linked.load(std::memory_order_acquire) ||
            victim->top_level != found ||
            victim->marked.load(std::memory_order_acquire)) {
          return false;
        }
        top = victim->top_level;
        victim->lock.lock();
        if (victim->marked.load(std::memory_order_relaxed)) {
          victim->lock.unlock();
          return false;
        }
        victim->marked.store(true, std::memory_order_release);
        marked_by_us = true;
      }
      int highest_locked = -1;
      node* prev_locked = nullptr;
      bool valid = true;
      for (int lv = 0; valid && lv <= top; ++lv) {
        node* pred = preds[lv];
        if (pred != prev_locked) {
          pred->lock.lock();
          highest_locked = lv;
          prev_locked = pred;
        }
        valid = !pred->marked.load(std::memory_order_relaxed) &&
                pred->next[lv].load(std::memory_order_relaxed) == victim;
      }
      if (!valid) {
        unlock_preds(preds, highest_locked);
        continue;
      }
      for (int lv = top; lv >= 0; --lv) {
        preds[lv]->next[lv].store(victim->next[lv].load(std::memory_order_relaxed),
                                  std::memory_order_release);
      }
      victim->lock.unlock();
      unlock_preds(preds, highest_locked);
      {
        std::lock_guard<std::mutex> g(garbage_mutex_);
        garbage_.push_back(victim);
      }
      return true;
    }
  }

  std::vector<std::uint64_t> keys() const {
    std::vector<std::uint64_t> out;
    for (node* n = head_->next[0].load(std::memory_order_acquire); n != nullptr;
         n = n->next[0].load(std::memory_order_acquire)) {
      if (!n->marked.load(std::memory_order_relaxed)) out.push_back(n->key);
    }
    return out;
  }

 private:
  struct node {
    std::uint64_t key = 0;
    int top_level = 0;
    std::mutex lock;
    std::atomic<bool> fully_linked{false};
    std::atomic<bool> marked{false};
    std::unique_ptr<std::atomic<node*>[]> next;
  };

  static node* make_node(std::uint64_t key, int top) {
    auto* n = new node;
    n->key = key;
    n->top_level = top;
    n->next = std::make_unique<std::atomic<node*>[]>(static_cast<std::size_t>(top) + 1);
    return n;
  }

  void unlock_preds(node* const* preds, int highest_locked) {
    node* prev = nullptr;
    for (int lv = 0; lv <= highest_locked; ++lv) {
      if (preds[lv] != prev) {
        preds[lv]->lock.unlock();
        prev = preds[lv];
      }
    }
  }

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
    const int lvl = std::countr_one(rng());
    return lvl >= kMaxLevel ? kMaxLevel - 1 : lvl;
  }

  node* head_;
  std::mutex garbage_mutex_;
  std::vector<node*> garbage_;
};

// --- runners -------------------------------------------------------------------

namespace detail {

template <class Fn>
void with_lock(const bench_config& cfg, epoch_domain& domain, Fn&& fn) {
  switch (cfg.lock) {
    case lock_kind::list_ex: {
      fair_range_lock<list_range_lock> l(cfg.patience, domain);
      fn(l);
      break;
    }
    case lock_kind::list_rw: {
      fair_range_lock<rw_list_range_lock> l(cfg.patience, domain);
      fn(l);
      break;
    }
    case lock_kind::lustre_ex: {
      lustre_range_lock l;
      fn(l);
      break;
    }
    case lock_kind::kernel_rw: {
      kernel_rw_range_lock l;
      fn(l);
      break;
    }
    case lock_kind::pnova_rw: {
      segment_range_lock l(cfg.slots, 256);
      fn(l);
      break;
    }
    case lock_kind::orig:
      throw bench_error("config: orig is skiplist-only");
  }
}

struct arr_worker_out {
  std::uint64_t ops = 0;
  std::vector<std::uint64_t> write_tally;
  std::uint64_t sink = 0;
};

template <class Lock>
run_result arrbench_one_run(const bench_config& cfg, Lock& lock, slot_array& slots,
                            std::uint32_t run_idx) {
  slots.zero();
  std::atomic<bool> stop{false};
  std::barrier sync(static_cast<std::ptrdiff_t>(cfg.threads) + 1);
  std::vector<arr_worker_out> outs(cfg.threads);
  const std::uint32_t width =
      cfg.benchmark == bench_kind::arrbench_disjoint ? cfg.slots / cfg.threads : 0;

  auto body = [&](std::uint32_t tid) {
    if (cfg.pin_threads) pin_to_cpu(tid);
    std::mt19937_64 rng(mix_seed(cfg.seed, run_idx, tid));
    arr_worker_out out;
    out.write_tally.assign(cfg.slots, 0);
    sync.arrive_and_wait();
    while (!stop.load(std::memory_order_relaxed)) {
      const bool is_read = (rng() % 100) < cfg.read_pct;
      std::uint32_t s;
      std::uint32_t e;
      switch (cfg.benchmark) {
        case bench_kind::arrbench_full:
          s = 0;
          e = cfg.slots;
          break;
        case bench_kind::arrbench_disjoint:
          s = tid * width;
          e = s + width;
          break;
        default: {
          const auto d = draw_random_range(rng, cfg.slots);
          s = d.start;
          e = d.end;
          break;
        }
      }
      auto h = lock.acquire(s, e, is_read ? access::reader : access::writer);
      const std::uint32_t passes =
          cfg.benchmark == bench_kind::arrbench_disjoint ? cfg.threads : 1;
      for (std::uint32_t p = 0; p < passes; ++p) {
        if (is_read) {
          for (std::uint32_t i = s; i < e; ++i) out.sink += slots.at(i);
        } else {
          for (std::uint32_t i = s; i < e; ++i) {
            slots.at(i) += 1;
            ++out.write_tally[i];
          }
        }
      }
      lock.release(h);
      if (cfg.noop_max > 0) noop_work(rng() % (std::uint64_t{cfg.noop_max} + 1));
      ++out.ops;
    }
    outs[tid] = std::move(out);
  };

  std::vector<std::thread> threads;
  threads.reserve(cfg.threads);
  for (std::uint32_t t = 0; t < cfg.threads; ++t) threads.emplace_back(body, t);
  sync.arrive_and_wait();
  const auto t0 = std::chrono::steady_clock::now();
  std::this_thread::sleep_for(std::chrono::duration<double>(cfg.duration_secs));
  stop.store(true, std::memory_order_relaxed);
  for (auto& t : threads) t.join();
  const auto t1 = std::chrono::steady_clock::now();

  // Lost-update oracle: per-slot private tallies must match the shared array.
  for (std::uint32_t i = 0; i < cfg.slots; ++i) {
    std::uint64_t expect = 0;
    for (const auto& o : outs) expect += o.write_tally[i];
    if (slots.at(i) != expect) {
      throw bench_error("lost update detected on slot " + std::to_string(i));
    }
  }

  run_result r;
  r.secs = std::chrono::duration<double>(t1 - t0).count();
  for (const auto& o : outs) r.ops_per_thread.push_back(o.ops);
  r.throughput = static_cast<double>(r.total_ops()) / r.secs;
  return r;
}

}  // namespace detail

inline bench_result run_arrbench(const bench_config& cfg) {
  validate(cfg);
  bench_result result;
  result.cfg = cfg;
  epoch_domain domain;
  slot_array slots(cfg.slots, cfg.cacheline_bytes);
  detail::with_lock(cfg, domain, [&](auto& lock) {
    for (std::uint32_t r = 0; r < cfg.runs; ++r) {
      result.runs.push_back(detail::arrbench_one_run(cfg, lock, slots, r));
    }
  });
  aggregate(result);
  return result;
}

namespace detail {

enum class set_op : std::uint8_t { find, insert, remove };

struct set_tape_entry {
  set_op op;
  std::uint64_t key;
  bool result;
};

template <class Set>
run_result skiplist_one_run(const bench_config& cfg, std::uint32_t run_idx,
                            std::uint64_t key_range, std::uint64_t prefill_ops) {
  Set set;
  {
    std::mt19937_64 rng(mix_seed(cfg.seed, run_idx, 0xfeed));
    for (std::uint64_t i = 0; i < prefill_ops; ++i) set.insert(1 + rng() % key_range);
  }

  std::atomic<bool> stop{false};
  std::barrier sync(static_cast<std::ptrdiff_t>(cfg.threads) + 1);
  std::vector<std::uint64_t> ops(cfg.threads, 0);
  const bool record = cfg.threads == 1;
  std::vector<set_tape_entry> tape;

  auto body = [&](std::uint32_t tid) {
    if (cfg.pin_threads) pin_to_cpu(tid);
    std::mt19937_64 rng(mix_seed(cfg.seed, run_idx, tid));
    const std::uint32_t update_pct = 100 - cfg.read_pct;
    const std::uint32_t insert_cut = cfg.read_pct + update_pct / 2;
    std::uint64_t n = 0;
    sync.arrive_and_wait();
    while (!stop.load(std::memory_order_relaxed)) {
      const auto p = static_cast<std::uint32_t>(rng() % 100);
      const std::uint64_t key = 1 + rng() % key_range;
      if (p < cfg.read_pct) {
        const bool r = set.contains(key);
        if (record) tape.push_back({set_op::find, key, r});
      } else if (p < insert_cut) {
        const bool r = set.insert(key);
        if (record) tape.push_back({set_op::insert, key, r});
      } else {
        const bool r = set.remove(key);
        if (record) tape.push_back({set_op::remove, key, r});
      }
      ++n;
    }
    ops[tid] = n;
  };

  std::vector<std::thread> threads;
  for (std::uint32_t t = 0; t < cfg.threads; ++t) threads.emplace_back(body, t);
  sync.arrive_and_wait();
  const auto t0 = std::chrono::steady_clock::now();
  std::this_thread::sleep_for(std::chrono::duration<double>(cfg.duration_secs));
  stop.store(true, std::memory_order_relaxed);
  for (auto& t : threads) t.join();
  const auto t1 = std::chrono::steady_clock::now();

  if (record) {
    // Replay against a sequential set: results and the final contents must
    // match exactly in a single-threaded run.
    std::set<std::uint64_t> oracle;
    {
      std::mt19937_64 rng(mix_seed(cfg.seed, run_idx, 0xfeed));
      for (std::uint64_t i = 0; i < prefill_ops; ++i) oracle.insert(1 + rng() % key_range);
    }
    for (const auto& e : tape) {
      bool expect = false;
      switch (e.op) {
        case set_op::find: expect = oracle.count(e.key) > 0; break;
        case set_op::insert: expect = oracle.insert(e.key).second; break;
        case set_op::remove: expect = oracle.erase(e.key) > 0; break;
      }
      if (expect != e.result) throw bench_error("skiplist: diverged from sequential oracle");
    }
    const auto keys = set.keys();
    if (!std::equal(keys.begin(), keys.end(), oracle.begin(), oracle.end())) {
      throw bench_error("skiplist: final set differs from sequential oracle");
    }
  }

  run_result r;
  r.secs = std::chrono::duration<double>(t1 - t0).count();
  r.ops_per_thread = std::move(ops);
  r.throughput = static_cast<double>(r.total_ops()) / r.secs;
  return r;
}

}  // namespace detail

inline bench_result run_skiplist(const bench_config& cfg) {
  validate(cfg);
  bench_result result;
  result.cfg = cfg;
  const std::uint64_t key_range =
      cfg.key_range != 0 ? cfg.key_range : (cfg.paper_scale ? (8ull << 20) : (1ull << 17));
  const std::uint64_t prefill = key_range / 2;
  for (std::uint32_t r = 0; r < cfg.runs; ++r) {
    switch (cfg.lock) {
      case lock_kind::list_ex: {
        struct range_list_set {
          epoch_domain domain;
          range_locked_skiplist<list_range_lock> list{domain, domain};
          bool contains(std::uint64_t k) const { return list.contains(k); }
          bool insert(std::uint64_t k) { return list.insert(k); }
          bool remove(std::uint64_t k) { return list.remove(k); }
          std::vector<std::uint64_t> keys() const { return list.keys(); }
        };
        result.runs.push_back(
            detail::skiplist_one_run<range_list_set>(cfg, r, key_range, prefill));
        break;
      }
      case lock_kind::lustre_ex: {
        struct range_tree_set {
          epoch_domain domain;
          range_locked_skiplist<lustre_range_lock> list{domain};
          bool contains(std::uint64_t k) const { return list.contains(k); }
          bool insert(std::uint64_t k) { return list.insert(k); }
          bool remove(std::uint64_t k) { return list.remove(k); }
          std::vector<std::uint64_t> keys() const { return list.keys(); }
        };
        result.runs.push_back(
            detail::skiplist_one_run<range_tree_set>(cfg, r, key_range, prefill));
        break;
      }
      case lock_kind::orig:
        result.runs.push_back(detail::skiplist_one_run<lazy_skiplist>(cfg, r, key_range, prefill));
        break;
      default:
        throw bench_error("config: skiplist supports list-ex, lustre-ex or orig");
    }
  }
  aggregate(result);
  return result;
}

namespace detail {

struct arena_tape_entry {
  std::uint64_t addr;
  vm::prot_flags prot;
};

}  // namespace detail

/// Per-thread memory arenas: every thread owns one large PROT_NONE mapping and
/// repeatedly grows or shrinks a read-write prefix one page at a time, mixing
/// in page faults at random owned addresses. After the initial splits all
/// boundary updates complete on the speculative mprotect path.
inline bench_result run_vma_arena(const bench_config& cfg) {
  validate(cfg);
  bench_result result;
  result.cfg = cfg;
  constexpr vm::prot_flags kRw = vm::prot_read | vm::prot_write;

  std::uint64_t spec_ok = 0;
  std::uint64_t calls = 0;
  std::uint64_t retries = 0;

  for (std::uint32_t run_idx = 0; run_idx < cfg.runs; ++run_idx) {
    epoch_domain domain;
    vm::address_space space(domain);
    const std::uint64_t arena_bytes = std::uint64_t{cfg.arena_pages} * vm::kPageSize;
    std::vector<std::uint64_t> arenas(cfg.threads);
    for (std::uint32_t t = 0; t < cfg.threads; ++t) {
      const auto addr = space.mmap(arena_bytes, vm::prot_none);
      if (!addr) throw bench_error("vma-arena: mmap failed");
      arenas[t] = *addr;
    }

    std::atomic<bool> stop{false};
    std::barrier sync(static_cast<std::ptrdiff_t>(cfg.threads) + 1);
    std::vector<std::uint64_t> ops(cfg.threads, 0);
    std::vector<std::vector<detail::arena_tape_entry>> tapes(cfg.threads);

    auto body = [&](std::uint32_t tid) {
      if (cfg.pin_threads) pin_to_cpu(tid);
      std::mt19937_64 rng(mix_seed(cfg.seed, run_idx, tid));
      const std::uint64_t base = arenas[tid];
      std::uint32_t prefix = 0;  // pages currently mapped read-write
      std::uint64_t n = 0;
      sync.arrive_and_wait();
      while (!stop.load(std::memory_order_relaxed)) {
        const auto p = static_cast<std::uint32_t>(rng() % 100);
        if (p < cfg.fault_pct) {
          const std::uint64_t addr =
              base + (rng() % cfg.arena_pages) * vm::kPageSize + (rng() % vm::kPageSize);
          (void)space.page_fault(addr);
        } else {
          // Keep at least one protected page and one trailing unprotected
          // page so steady-state updates stay pure boundary shifts.
          const bool grow = prefix <= 1                     ? true
                            : prefix >= cfg.arena_pages - 1 ? false
                                                            : (rng() & 1) != 0;
          std::uint64_t addr;
          vm::prot_flags prot;
          if (grow) {
            addr = base + std::uint64_t{prefix} * vm::kPageSize;
            prot = kRw;
            ++prefix;
          } else {
            addr = base + std::uint64_t{prefix - 1} * vm::kPageSize;
            prot = vm::prot_none;
            --prefix;
          }
          const auto out = space.mprotect(addr, vm::kPageSize, prot);
          if (out == vm::mprotect_outcome::error) {
            throw bench_error("vma-arena: unexpected mprotect error");
          }
          tapes[tid].push_back({addr, prot});
        }
        ++n;
      }
      ops[tid] = n;
    };

    std::vector<std::thread> threads;
    for (std::uint32_t t = 0; t < cfg.threads; ++t) threads.emplace_back(body, t);
    sync.arrive_and_wait();
    const auto t0 = std::chrono::steady_clock::now();
    std::this_thread::sleep_for(std::chrono::duration<double>(cfg.duration_secs));
    stop.store(true, std::memory_order_relaxed);
    for (auto& t : threads) t.join();
    const auto t1 = std::chrono::steady_clock::now();

    // Regions are disjoint per thread, so each arena's final protection map
    // must equal a per-thread oracle replay.
    for (std::uint32_t t = 0; t < cfg.threads; ++t) {
      vm::vma_oracle oracle;
      oracle.map_fixed(arenas[t], arena_bytes, vm::prot_none);
      for (const auto& e : tapes[t]) {
        if (!oracle.mprotect(e.addr, vm::kPageSize, e.prot)) {
          throw bench_error("vma-arena: oracle replay rejected an op");
        }
      }
      for (std::uint32_t pg = 0; pg < cfg.arena_pages; ++pg) {
        const std::uint64_t addr = arenas[t] + std::uint64_t{pg} * vm::kPageSize;
        const auto want = oracle.page_prot(addr);
        const auto got = space.lookup(addr);
        const bool mapped = got && got->start <= addr && addr < got->end;
        if (!want || !mapped || got->prot != *want) {
          throw bench_error("vma-arena: final layout differs from oracle replay");
        }
      }
    }

    const auto& st = space.stats();
    if (cfg.threads == 1 && st.validation_retries.load() != 0) {
      throw bench_error("vma-arena: single-threaded run saw validation retries");
    }
    spec_ok += st.speculative_successes.load();
    calls += st.mprotect_calls.load();
    retries += st.validation_retries.load();

    run_result r;
    r.secs = std::chrono::duration<double>(t1 - t0).count();
    r.ops_per_thread = ops;
    r.throughput = static_cast<double>(r.total_ops()) / r.secs;
    result.runs.push_back(std::move(r));
  }

  result.speculation_success_rate =
      calls == 0 ? 1.0 : static_cast<double>(spec_ok) / static_cast<double>(calls);
  result.validation_retries = retries;
  aggregate(result);
  return result;
}

inline bench_result run(const bench_config& cfg) {
  switch (cfg.benchmark) {
    case bench_kind::arrbench_full:
    case bench_kind::arrbench_disjoint:
    case bench_kind::arrbench_random:
      return run_arrbench(cfg);
    case bench_kind::skiplist:
      return run_skiplist(cfg);
    case bench_kind::vma_arena:
      return run_vma_arena(cfg);
  }
  throw bench_error("config: unknown benchmark");
}

}  // namespace rangelock::bench
