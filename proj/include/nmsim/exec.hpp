#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nmsim {

// Every parallel kernel in this library has a serial twin selected by this
// policy; both produce bit-identical results because all per-index work is
// independent and written to disjoint slots.
enum class ExecPolicy { serial, parallel };

void set_max_threads(int n);
int max_threads();

template <typename F>
void parallel_for(std::int64_t n, ExecPolicy policy, F&& fn) {
#ifdef _OPENMP
    if (policy == ExecPolicy::parallel) {
        #pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
#else
    (void)policy;
#endif
    for (std::int64_t i = 0; i < n; ++i) fn(i);
}

}  // namespace nmsim
