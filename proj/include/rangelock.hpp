#pragma once

// List-based range locks with reader-writer support, fairness and epoch-based
// node reclamation, plus baseline range-lock implementations, a range-locked
// skip list and a virtual-address-space simulator with speculative mprotect.

#include "rangelock/range.hpp"       // IWYU pragma: export
#include "rangelock/reclaim.hpp"     // IWYU pragma: export
#include "rangelock/list_lock.hpp"   // IWYU pragma: export
#include "rangelock/fair.hpp"        // IWYU pragma: export
#include "rangelock/tree_lock.hpp"   // IWYU pragma: export
#include "rangelock/segment_lock.hpp"  // IWYU pragma: export
#include "rangelock/skiplist.hpp"    // IWYU pragma: export
#include "rangelock/vma.hpp"         // IWYU pragma: export
#include "rangelock/vma_oracle.hpp"  // IWYU pragma: export
