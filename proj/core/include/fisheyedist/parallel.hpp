#pragma once

#include <functional>

namespace fisheyedist {

/// Worker cap from the FDNET_THREADS environment variable; 0 or unset means
/// sequential deterministic mode.
int thread_budget();

/// Runs fn(y) for every row in [0, height), across threads when the budget
/// allows. Rows must write disjoint output; reductions stay sequential.
void parallel_rows(int height, const std::function<void(int)>& fn);

}  // namespace fisheyedist
