// Benchmark harness for the range-lock library: ArrBench (full / disjoint /
// random range regimes), a skip-list set workload and a per-thread-arena
// mprotect workload, each runnable against the different lock
// implementations. Emits one CSV row per run plus a human-readable summary.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rangelock/bench.hpp"
#include "rangelock/spin.hpp"

namespace {

using namespace rangelock::bench;

std::vector<lock_kind> default_locks(bench_kind b) {
  switch (b) {
    case bench_kind::skiplist:
      return {lock_kind::orig, lock_kind::lustre_ex, lock_kind::list_ex};
    case bench_kind::vma_arena:
      return {lock_kind::list_rw};
    default:
      return {lock_kind::list_ex, lock_kind::list_rw, lock_kind::lustre_ex,
              lock_kind::kernel_rw, lock_kind::pnova_rw};
  }
}

void print_summary(const bench_result& r) {
  std::printf("%-18s %-10s t=%-3u read=%3u%%  mean=%12.0f ops/s  stddev=%10.0f",
              to_string(r.cfg.benchmark), to_string(r.cfg.lock), r.cfg.threads,
              r.cfg.read_pct, r.mean_throughput, r.stddev_throughput);
  if (r.speculation_success_rate >= 0) {
    std::printf("  spec=%.4f retries=%llu", r.speculation_success_rate,
                static_cast<unsigned long long>(r.validation_retries));
  }
  std::printf("\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"range lock microbenchmarks"};

  std::string benchmark_name;
  std::vector<std::string> lock_names;
  std::vector<std::uint32_t> thread_counts{1, 2, 4, 8, 16};
  bench_config base;
  std::string csv_path;
  std::uint32_t spin_limit = rangelock::spin_config::spin_limit.load();

  app.add_option("-b,--benchmark", benchmark_name,
                 "arrbench-full | arrbench-disjoint | arrbench-random | skiplist | vma-arena")
      ->required();
  app.add_option("-l,--lock", lock_names,
                 "lock implementations (list-ex list-rw lustre-ex kernel-rw pnova-rw; "
                 "skiplist also accepts orig); default: all that fit the benchmark");
  app.add_option("-t,--threads", thread_counts, "thread counts to sweep")
      ->capture_default_str();
  app.add_option("-r,--read-pct", base.read_pct, "percentage of read (find) operations")
      ->capture_default_str();
  app.add_option("-d,--duration", base.duration_secs, "seconds per run")
      ->capture_default_str();
  app.add_option("-n,--runs", base.runs, "runs per configuration")->capture_default_str();
  app.add_option("--slots", base.slots, "array slots")->capture_default_str();
  app.add_option("--noop-max", base.noop_max, "max no-op work between operations")
      ->capture_default_str();
  app.add_option("--seed", base.seed, "rng seed")->capture_default_str();
  app.add_option("--patience", base.patience,
                 "fairness gate threshold for the list locks (default: gate disabled)");
  app.add_flag("--pin", base.pin_threads, "pin worker threads to cpus");
  app.add_option("--cacheline", base.cacheline_bytes, "slot padding stride in bytes")
      ->capture_default_str();
  app.add_flag("--paper-scale", base.paper_scale,
               "paper-scale parameters (larger key range, 10 s runs)");
  app.add_option("--key-range", base.key_range, "skiplist key range (0 = derived)");
  app.add_option("--arena-pages", base.arena_pages, "vma-arena pages per thread arena")
      ->capture_default_str();
  app.add_option("--fault-pct", base.fault_pct, "vma-arena page-fault percentage")
      ->capture_default_str();
  app.add_option("--spin-limit", spin_limit, "spins before waiters yield")
      ->capture_default_str();
  app.add_option("--csv", csv_path, "write per-run CSV rows to this file");

  CLI11_PARSE(app, argc, argv);

  rangelock::spin_config::spin_limit.store(spin_limit);
  if (base.paper_scale && app.count("--duration") == 0) base.duration_secs = 10.0;
  if (const char* env = std::getenv("RANGELOCK_PATIENCE");
      env != nullptr && app.count("--patience") == 0) {
    base.patience = static_cast<std::uint32_t>(std::strtoul(env, nullptr, 10));
  }

  const auto bench = parse_bench_kind(benchmark_name);
  if (!bench) {
    std::fprintf(stderr, "unknown benchmark: %s\n", benchmark_name.c_str());
    return 1;
  }

  std::vector<lock_kind> locks;
  if (lock_names.empty()) {
    locks = default_locks(*bench);
  } else {
    for (const auto& n : lock_names) {
      const auto l = parse_lock_kind(n);
      if (!l) {
        std::fprintf(stderr, "unknown lock: %s\n", n.c_str());
        return 1;
      }
      locks.push_back(*l);
    }
  }

  std::vector<csv_row> rows;
  try {
    for (const auto lock : locks) {
      for (const auto threads : thread_counts) {
        bench_config cfg = base;
        cfg.benchmark = *bench;
        cfg.lock = lock;
        cfg.threads = threads;
        validate(cfg);
        const bench_result result = run(cfg);
        print_summary(result);
        const auto r = rows_of(result);
        rows.insert(rows.end(), r.begin(), r.end());
      }
    }
    if (!csv_path.empty()) {
      emit_csv(rows, csv_path);
    } else {
      emit_csv(rows, std::cout);
    }
  } catch (const bench_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
