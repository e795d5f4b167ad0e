#pragma once

#include <cstddef>

namespace frailtycc {

/// Selects between the OpenMP kernels and a single-threaded run of the same
/// kernels. Both produce bit-identical results: per-unit contributions are
/// written to a buffer and reduced serially in a fixed order.
enum class Exec { Serial, Parallel };

/// Number of worker threads OpenMP regions will use (1 without OpenMP).
int max_threads();

/// Bounds OpenMP parallelism; 0 restores the runtime default.
void set_threads(int n);

/// True when called from inside an active parallel region. Kernels use this
/// to avoid nested parallelism when replicates are already spread over threads.
bool in_parallel_region();

}  // namespace frailtycc
