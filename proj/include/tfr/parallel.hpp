#ifndef TFR_PARALLEL_HPP
#define TFR_PARALLEL_HPP

#include <utility>

namespace tfr {

// Runs fn(0..n-1), with OpenMP when enabled and available. Work items must
// be independent and write to disjoint slots; under that contract the
// parallel and serial paths produce identical results, which the test
// suite checks and the benchmark relies on.
template <class F>
void parallel_for(int n, bool parallel, F&& fn) {
#ifdef _OPENMP
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
#else
  (void)parallel;
#endif
  for (int i = 0; i < n; ++i) fn(i);
}

}  // namespace tfr

#endif
