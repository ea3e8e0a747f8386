#pragma once

#include <functional>

namespace geoflow {

// Worker count used by parallel_for; 1 means serial. Defaults to GEOFLOW_THREADS or 1.
int thread_count();
void set_thread_count(int n);

// Runs body(i) for i in [0, n). Each index writes only its own output, so results do not
// depend on the thread count.
void parallel_for(int n, const std::function<void(int)>& body);

}  // namespace geoflow
