#pragma once

#include <atomic>
#include <cstdint>
#include <thread>

namespace rangelock {

namespace detail {

inline void cpu_relax() noexcept {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_ia32_pause();
#elif defined(__aarch64__)
  asm volatile("yield" ::: "memory");
#else
  std::atomic_signal_fence(std::memory_order_seq_cst);
#endif
}

}  // namespace detail

/// Polite busy-wait knob shared by all waiting loops: relax the CPU for
/// `spin_limit` iterations, then fall back to yielding to the scheduler.
struct spin_config {
  static inline std::atomic<std::uint32_t> spin_limit{1u << 10};
};

class spin_wait {
 public:
  void pause() noexcept {
    if (spins_ < spin_config::spin_limit.load(std::memory_order_relaxed)) {
      ++spins_;
      detail::cpu_relax();
    } else {
      std::this_thread::yield();
    }
  }

  void reset() noexcept { spins_ = 0; }

 private:
  std::uint32_t spins_ = 0;
};

}  // namespace rangelock
