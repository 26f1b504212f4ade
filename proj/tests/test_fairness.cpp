#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <thread>
#include <vector>

#include "rangelock/fair.hpp"
#include "rangelock/list_lock.hpp"
#include "support/occupancy.hpp"

using namespace rangelock;

TEST_CASE("ticket rw mutex admits concurrent readers", "[fairness]") {
  ticket_rw_mutex m;
  m.lock_shared();
  m.lock_shared();  // second reader passes without the first unlocking
  m.unlock_shared();
  m.unlock_shared();
}

TEST_CASE("ticket rw mutex excludes writers", "[fairness]") {
  ticket_rw_mutex m;
  std::atomic<int> in_cs{0};
  std::atomic<int> max_seen{0};
  std::atomic<bool> reader_entered{false};

  m.lock();
  std::thread reader([&] {
    m.lock_shared();
    reader_entered.store(true);
    m.unlock_shared();
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  REQUIRE_FALSE(reader_entered.load());
  m.unlock();
  REQUIRE(harness::eventually([&] { return reader_entered.load(); }, 10.0));
  reader.join();

  // Mixed stress: writers are mutually exclusive and exclude readers.
  std::vector<std::thread> workers;
  std::atomic<std::uint64_t> violations{0};
  for (int t = 0; t < 4; ++t) {
    workers.emplace_back([&, t] {
      std::mt19937_64 rng(t);
      for (int i = 0; i < 20000; ++i) {
        if (rng() % 2 == 0) {
          m.lock();
          if (in_cs.fetch_add(100) != 0) violations.fetch_add(1);
          in_cs.fetch_sub(100);
          m.unlock();
        } else {
          m.lock_shared();
          if (in_cs.fetch_add(1) >= 100) violations.fetch_add(1);
          in_cs.fetch_sub(1);
          m.unlock_shared();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  REQUIRE(violations.load() == 0);
  (void)max_seen;
}

TEST_CASE("uncontended guarded acquire leaves the gate untouched", "[fairness]") {
  epoch_domain domain;
  fair_range_lock<rw_list_range_lock> lock(16, domain);
  auto h = lock.acquire(0, 100, access::writer);
  REQUIRE(lock.impatient() == 0);
  lock.release(h);
}

TEST_CASE("a disabled gate is pure passthrough", "[fairness]") {
  epoch_domain domain;
  fair_range_lock<list_range_lock> lock(kNeverEscalate, domain);
  auto h = lock.acquire(1, 2, access::writer);
  REQUIRE(lock.impatient() == 0);
  lock.release(h);
}

TEST_CASE("gate safety: occupancy holds with escalation exercised",
          "[fairness][stress]") {
  epoch_domain domain;
  fair_range_lock<rw_list_range_lock> lock(4, domain);
  const auto r = harness::run_occupancy(lock, 4, 15000, 64, 70, 71);
  REQUIRE(r.violations == 0);
}

TEST_CASE("an impatient writer escalates through reader churn", "[fairness][stress]") {
  epoch_domain domain;
  lock_stats stats;
  fair_range_lock<rw_list_range_lock> lock(16, domain, &stats);

  std::atomic<bool> stop{false};
  std::vector<std::thread> churn;
  for (int t = 0; t < 4; ++t) {
    churn.emplace_back([&, t] {
      std::mt19937_64 rng(t + 100);
      while (!stop.load()) {
        const auto [s, e] = harness::draw_range(rng, 100);
        auto h = lock.acquire(s, e, access::reader);
        lock.release(h);
      }
    });
  }

  std::atomic<bool> w_done{false};
  std::thread writer([&] {
    auto h = lock.acquire(20, 80, access::writer);
    w_done.store(true);
    lock.release(h);
  });

  // The writer must finish even while the churn keeps running.
  const bool done = harness::eventually([&] { return w_done.load(); }, 30.0);
  stop.store(true);
  for (auto& t : churn) t.join();
  writer.join();
  REQUIRE(done);
  REQUIRE(lock.impatient() == 0);
}
