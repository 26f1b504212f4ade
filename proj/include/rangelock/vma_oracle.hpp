#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "vma.hpp"

namespace rangelock::vm {

/// Single-threaded reference semantics for the address-space operations,
/// kept deliberately independent of the concurrent implementation: state is a
/// plain page -> protection map, and the VMA view is derived by coalescing
/// adjacent pages with equal protection.
class vma_oracle {
 public:
  explicit vma_oracle(std::uint64_t mmap_base = 0x10000) : mmap_base_(mmap_base) {}

  std::optional<std::uint64_t> mmap(std::uint64_t size, prot_flags prot) {
    if (size == 0 || size % kPageSize != 0) return std::nullopt;
    const std::uint64_t pages = size / kPageSize;
    std::uint64_t candidate = mmap_base_;
    for (const auto& [page, p] : pages_) {
      if (page >= candidate && (page - candidate) / kPageSize >= pages) break;
      if (page >= candidate) candidate = page + kPageSize;
    }
    if (candidate + size < candidate || candidate + size > kFullRangeEnd) return std::nullopt;
    map_fixed(candidate, size, prot);
    return candidate;
  }

  /// Test setup helper: install a mapping at a known address.
  void map_fixed(std::uint64_t addr, std::uint64_t size, prot_flags prot) {
    for (std::uint64_t a = addr; a < addr + size; a += kPageSize) pages_[a] = prot;
  }

  munmap_outcome munmap(std::uint64_t addr, std::uint64_t size) {
    if (size == 0 || addr % kPageSize != 0 || size % kPageSize != 0 || addr + size < addr) {
      return munmap_outcome::error;
    }
    bool any = false;
    for (std::uint64_t a = addr; a < addr + size; a += kPageSize) {
      any = pages_.erase(a) > 0 || any;
    }
    return any ? munmap_outcome::ok : munmap_outcome::error;
  }

  /// Success/error only: the oracle has no speculative path to distinguish.
  bool mprotect(std::uint64_t addr, std::uint64_t size, prot_flags prot) {
    if (size == 0 || addr % kPageSize != 0 || size % kPageSize != 0 || addr + size < addr) {
      return false;
    }
    for (std::uint64_t a = addr; a < addr + size; a += kPageSize) {
      if (pages_.find(a) == pages_.end()) return false;  // hole: no mutation
    }
    for (std::uint64_t a = addr; a < addr + size; a += kPageSize) pages_[a] = prot;
    return true;
  }

  fault_outcome page_fault(std::uint64_t addr, fault_access acc = fault_access::read) const {
    const auto it = pages_.find(addr & ~(kPageSize - 1));
    if (it == pages_.end()) return fault_outcome::segfault;
    const prot_flags p = it->second;
    const bool ok = acc == fault_access::read ? (p & prot_read) != 0 : (p & prot_write) != 0;
    return ok ? fault_outcome::ok : fault_outcome::segfault;
  }

  /// Mapped regions, adjacent equal-protection pages coalesced.
  std::vector<vma_info> segments() const {
    std::vector<vma_info> out;
    for (const auto& [page, prot] : pages_) {
      if (!out.empty() && out.back().end == page && out.back().prot == prot) {
        out.back().end = page + kPageSize;
      } else {
        out.push_back({page, page + kPageSize, prot});
      }
    }
    return out;
  }

  std::optional<prot_flags> page_prot(std::uint64_t addr) const {
    const auto it = pages_.find(addr & ~(kPageSize - 1));
    if (it == pages_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::map<std::uint64_t, prot_flags> pages_;
  std::uint64_t mmap_base_;
};

}  // namespace rangelock::vm
