#pragma once

#include <functional>

namespace mvhdr {

// Process-wide worker count for parallel phases; 0 selects the hardware
// concurrency.
void set_thread_count(int threads);
int thread_count();

// Runs body(i) for i in [begin, end) on up to thread_count() workers, split
// into contiguous static chunks. The first exception thrown is rethrown.
void parallel_for(int begin, int end, const std::function<void(int)>& body);

}  // namespace mvhdr
