#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mml::par {

// Independent per-index work (seed sweeps, bulk sample evaluation). Results
// land in slot i regardless of which thread produced them, and any reduction
// happens afterwards in index order, so the OpenMP path is bit-identical to
// the serial reference. Games and training loops stay single-threaded; only
// whole independent runs and read-only bulk evaluations go through here.

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

template <class T, class Fn>
std::vector<T> map_indexed_serial(std::size_t n, Fn&& fn) {
    std::vector<T> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(fn(i));
    return out;
}

template <class T, class Fn>
std::vector<T> map_indexed(std::size_t n, Fn&& fn, bool parallel = true) {
#ifdef _OPENMP
    if (parallel && n > 1 && max_threads() > 1) {
        std::vector<T> out(n);
        std::exception_ptr failure = nullptr;
#pragma omp parallel for schedule(dynamic)
        for (long long i = 0; i < static_cast<long long>(n); ++i) {
            try {
                out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
            } catch (...) {
#pragma omp critical
                if (!failure) failure = std::current_exception();
            }
        }
        if (failure) std::rethrow_exception(failure);
        return out;
    }
#else
    (void)parallel;
#endif
    return map_indexed_serial<T>(n, std::forward<Fn>(fn));
}

}  // namespace mml::par
