#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <limits>

#include "rangelock/range.hpp"

using namespace rangelock;

namespace {
constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
}

TEST_CASE("range construction rejects empty and inverted intervals", "[range]") {
  REQUIRE_THROWS_AS(range(3, 3), std::invalid_argument);
  REQUIRE_THROWS_AS(range(7, 2), std::invalid_argument);
  REQUIRE_NOTHROW(range(0, kMax));  // the full range is representable
  REQUIRE_NOTHROW(range(0, 1));
}

TEST_CASE("compare_exclusive ordering", "[range]") {
  const range a(2, 7);
  REQUIRE(compare_exclusive(&a, range(1, 3)) == range_order::overlap);

  REQUIRE(compare_exclusive(nullptr, range(10, 20)) == range_order::after);

  const range c(4, 5);
  REQUIRE(compare_exclusive(&c, range(1, 3)) == range_order::after);
  REQUIRE(compare_exclusive(&c, range(5, 9)) == range_order::before);
}

TEST_CASE("compare_rw ordering and reader ties", "[range]") {
  const range a(20, 25, access::reader);
  REQUIRE(compare_rw(&a, range(15, 45, access::reader)) == range_order::after);

  const range w(30, 35, access::writer);
  REQUIRE(compare_rw(&w, range(15, 45, access::reader)) == range_order::overlap);

  // Identical reader ranges: the before-branch is tested first in the
  // comparison, so the tie resolves to before, never overlap.
  const range r1(1, 10, access::reader);
  const auto tie = compare_rw(&r1, range(1, 10, access::reader));
  REQUIRE(tie == range_order::before);

  REQUIRE(compare_rw(nullptr, range(1, 2, access::reader)) == range_order::after);
}

TEST_CASE("overlaps basics", "[range]") {
  REQUIRE_FALSE(overlaps(range(1, 3), range(4, 5)));
  REQUIRE(overlaps(range(0, kMax), range(7, 8)));
  REQUIRE(overlaps(range(5, 6), range(5, 6)));
}

TEST_CASE("exhaustive comparator properties over coordinates 0..8", "[range]") {
  std::uint64_t checked = 0;
  for (std::uint64_t as = 0; as <= 8; ++as) {
    for (std::uint64_t ae = as + 1; ae <= 8; ++ae) {
      for (std::uint64_t bs = 0; bs <= 8; ++bs) {
        for (std::uint64_t be = bs + 1; be <= 8; ++be) {
          const range a(as, ae);
          const range b(bs, be);
          const auto ab = compare_exclusive(&a, b);
          const auto ba = compare_exclusive(&b, a);

          // Overlap result agrees with the overlap predicate and is symmetric;
          // nonzero results are antisymmetric.
          REQUIRE((ab == range_order::overlap) == overlaps(a, b));
          if (ab == range_order::overlap) {
            REQUIRE(ba == range_order::overlap);
          } else {
            REQUIRE(static_cast<int>(ab) == -static_cast<int>(ba));
          }

          // compare_rw reports overlap only for genuine conflicts: the ranges
          // intersect and at least one side is a writer.
          for (const auto ma : {access::reader, access::writer}) {
            for (const auto mb : {access::reader, access::writer}) {
              const range ra(as, ae, ma);
              const range rb(bs, be, mb);
              if (compare_rw(&ra, rb) == range_order::overlap) {
                REQUIRE(overlaps(ra, rb));
                REQUIRE((ma == access::writer || mb == access::writer));
              }
              if (ma == access::writer || mb == access::writer) {
                // With a writer involved the rw comparison matches the
                // exclusive one.
                REQUIRE(compare_rw(&ra, rb) == compare_exclusive(&ra, rb));
              } else {
                REQUIRE(compare_rw(&ra, rb) != range_order::overlap);
              }
              ++checked;
            }
          }
        }
      }
    }
  }
  REQUIRE(checked > 0);
}
