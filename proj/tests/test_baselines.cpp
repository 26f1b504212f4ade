#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <mutex>
#include <thread>
#include <vector>

#include "rangelock/segment_lock.hpp"
#include "rangelock/tree_lock.hpp"
#include "support/occupancy.hpp"

using namespace rangelock;

TEST_CASE("tree lock: empty tree grants immediately", "[baselines]") {
  lustre_range_lock lock;
  auto h = lock.acquire(0, 10);
  REQUIRE(lock.size() == 1);
  lock.release(h);
  REQUIRE(lock.size() == 0);
}

TEST_CASE("tree lock grants strictly in FIFO order", "[baselines]") {
  // A=[1,3) held, then B=[2,7) and C=[4,5) requested: C overlaps B only, so it
  // queues behind B even though it does not overlap the holder A.
  lustre_range_lock lock;
  std::mutex order_mutex;
  std::vector<char> order;

  auto a = lock.acquire(1, 3);
  std::atomic<bool> b_started{false};
  std::thread tb([&] {
    b_started.store(true);
    auto h = lock.acquire(2, 7);
    {
      std::lock_guard<std::mutex> g(order_mutex);
      order.push_back('B');
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    lock.release(h);
  });
  REQUIRE(harness::eventually([&] { return b_started.load(); }, 10.0));
  std::this_thread::sleep_for(std::chrono::milliseconds(80));  // B is now queued

  std::atomic<bool> c_done{false};
  std::thread tc([&] {
    auto h = lock.acquire(4, 5);
    {
      std::lock_guard<std::mutex> g(order_mutex);
      order.push_back('C');
    }
    c_done.store(true);
    lock.release(h);
  });

  std::this_thread::sleep_for(std::chrono::milliseconds(80));
  REQUIRE_FALSE(c_done.load());  // C waits behind B despite not overlapping A

  lock.release(a);
  tb.join();
  tc.join();
  REQUIRE(order == std::vector<char>{'B', 'C'});
}

TEST_CASE("rw tree lock lets overlapping readers through", "[baselines]") {
  kernel_rw_range_lock lock;
  auto r1 = lock.acquire(0, 10, access::reader);
  auto r2 = lock.acquire(5, 15, access::reader);
  lock.release(r1);
  lock.release(r2);

  auto w = lock.acquire(0, 10, access::writer);
  std::atomic<bool> blocked_done{false};
  std::thread t([&] {
    auto h = lock.acquire(5, 15, access::reader);
    blocked_done.store(true);
    lock.release(h);
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  REQUIRE_FALSE(blocked_done.load());
  lock.release(w);
  REQUIRE(harness::eventually([&] { return blocked_done.load(); }, 10.0));
  t.join();
}

TEST_CASE("tree lock occupancy and bookkeeping", "[baselines][stress]") {
  lustre_range_lock ex;
  REQUIRE(harness::run_occupancy(ex, 4, 15000, 64, 0, 3).violations == 0);
  REQUIRE(ex.size() == 0);

  kernel_rw_range_lock rw;
  REQUIRE(harness::run_occupancy(rw, 4, 15000, 64, 60, 7).violations == 0);
  REQUIRE(rw.size() == 0);
}

TEST_CASE("segment lock covers exactly the touched segments", "[baselines]") {
  segment_range_lock lock(256, 256);

  auto one = lock.acquire(3, 4, access::writer);  // a single segment
  std::atomic<bool> other_done{false};
  std::thread t([&] {
    auto h = lock.acquire(10, 20, access::writer);  // disjoint segments
    other_done.store(true);
    lock.release(h);
  });
  REQUIRE(harness::eventually([&] { return other_done.load(); }, 10.0));
  t.join();
  lock.release(one);

  // A full-range acquisition holds every segment, blocking everyone.
  auto full = lock.acquire(0, 256, access::writer);
  std::atomic<bool> blocked_done{false};
  std::thread t2([&] {
    auto h = lock.acquire(0, 1, access::reader);
    blocked_done.store(true);
    lock.release(h);
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  REQUIRE_FALSE(blocked_done.load());
  lock.release(full);
  REQUIRE(harness::eventually([&] { return blocked_done.load(); }, 10.0));
  t2.join();
}

TEST_CASE("segment lock rejects ranges outside the span", "[baselines]") {
  segment_range_lock lock(256, 256);
  REQUIRE_THROWS_AS(lock.acquire(250, 300, access::writer), std::out_of_range);
  REQUIRE_THROWS_AS(lock.acquire(5, 5, access::writer), std::invalid_argument);
}

TEST_CASE("segment lock occupancy", "[baselines][stress]") {
  segment_range_lock lock(64, 64);
  REQUIRE(harness::run_occupancy(lock, 4, 10000, 64, 60, 13).violations == 0);
}
