#pragma once

#include <stdexcept>

namespace rangelock {

/// Thrown by debug builds on API contract violations (double release,
/// unbalanced epoch brackets, double retire). Compiled out under NDEBUG.
class contract_error : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

[[noreturn]] inline void contract_fail(const char* what) {
  throw contract_error(what);
}

}  // namespace detail
}  // namespace rangelock

#ifndef NDEBUG
#define RANGELOCK_CONTRACT(cond, what) \
  do {                                 \
    if (!(cond)) ::rangelock::detail::contract_fail(what); \
  } while (0)
#else
#define RANGELOCK_CONTRACT(cond, what) ((void)0)
#endif
