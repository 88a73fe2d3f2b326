#pragma once

#include <cstddef>
#include <functional>

namespace fluid {

/// std::thread::hardware_concurrency(), at least 1.
unsigned default_thread_count();

/// Calls body(i) for i in [0, count) on up to `threads` workers (0 means
/// default_thread_count()). Work is handed out by index; callers write
/// results into index-addressed slots so output does not depend on
/// scheduling. The first exception thrown (lowest index) is rethrown.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace fluid
