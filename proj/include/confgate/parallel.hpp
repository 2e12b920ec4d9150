#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#include <omp.h>

namespace confgate {

// Thread budget for per-query kernels. threads <= 1 runs the loop inline.
struct Parallelism {
    int threads = 1;

    static Parallelism serial() { return {1}; }
    static Parallelism hardware() { return {omp_get_max_threads()}; }
};

// Runs body(i) for i in [0, n) under OpenMP static scheduling. Bodies must
// write only to slot i of their outputs; the first exception thrown by any
// iteration is rethrown on the calling thread after the loop.
template <typename Body>
void parallel_for(std::size_t n, const Parallelism& par, Body&& body) {
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto count = static_cast<std::ptrdiff_t>(n);
    const int threads = par.threads > 1 ? par.threads : 1;

#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) {
                failure = std::current_exception();
            }
        }
    }

    if (failure) {
        std::rethrow_exception(failure);
    }
}

} // namespace confgate
