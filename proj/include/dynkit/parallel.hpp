#pragma once

#include <exception>
#include <vector>

#include <omp.h>

namespace dynkit {

// Thread cap from DYNKIT_THREADS (unset or invalid: OpenMP default).
int max_threads();

// Runs f(i) for i in [0, n) on up to max_threads() threads. The first
// exception (lowest index) is rethrown after the loop.
template <class F>
void parallel_for(int n, F&& f) {
    std::vector<std::exception_ptr> errs(n);
#pragma omp parallel for schedule(dynamic) num_threads(max_threads())
    for (int i = 0; i < n; ++i) {
        try {
            f(i);
        } catch (...) {
            errs[i] = std::current_exception();
        }
    }
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

template <class F>
void serial_for(int n, F&& f) {
    for (int i = 0; i < n; ++i) f(i);
}

}  // namespace dynkit
