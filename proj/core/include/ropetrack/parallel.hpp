#pragma once

#include <cstddef>
#include <functional>

namespace ropetrack {

/// Worker count used by the renderer and gradient. 0 selects the hardware
/// concurrency. Results never depend on this value.
void set_thread_count(unsigned count);
unsigned thread_count();

/// Runs body(i) for i in [0, n). Each index is visited exactly once; callers
/// must write only to index-owned storage.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace ropetrack
