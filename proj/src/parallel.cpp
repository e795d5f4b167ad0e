#include "frailtycc/parallel.hpp"

#include <omp.h>

namespace frailtycc {

int max_threads() { return omp_get_max_threads(); }

void set_threads(int n) {
  static const int initial = omp_get_max_threads();
  omp_set_num_threads(n > 0 ? n : initial);
}

bool in_parallel_region() { return omp_in_parallel() != 0; }

}  // namespace frailtycc
