#pragma once

#include <functional>

namespace imstab {

// Global worker count for ensemble loops. Results are independent of the
// setting: work items write to disjoint slots and reductions run in index
// order.
void set_threads(int n);
int threads();

// Runs fn(i) for i in [0, n); parallel when threads() > 1.
void parallel_for(long n, const std::function<void(long)>& fn);

}  // namespace imstab
