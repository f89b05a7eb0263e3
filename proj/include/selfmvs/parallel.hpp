#pragma once

#include <functional>

namespace selfmvs {

// Upper bound on worker threads used by row-parallel loops. 1 = serial.
void set_num_threads(int n);
int num_threads();

// Calls fn(row) for every row in [0, rows). Rows are split into contiguous
// blocks; fn must only write to row-local state so the result does not
// depend on the thread count.
void parallel_rows(int rows, const std::function<void(int)>& fn);

}  // namespace selfmvs
